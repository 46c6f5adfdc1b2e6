// Acceptance suite: runs the evaluation protocol end to end at desk scale and
// prints one PASS/FAIL line per criterion. Exit code = number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "conformant/eval.hpp"
#include "conformant/pipeline.hpp"
#include "conformant/rng.hpp"

using namespace conformant;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int id;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Outcome> g_outcomes;

void run_criterion(int id, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  const auto start = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = body();
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  g_outcomes.push_back({id, name, pass, detail, secs});
  std::printf("[%s] criterion %2d: %s (%.1fs) %s\n", pass ? "PASS" : "FAIL", id,
              name.c_str(), secs, detail.c_str());
  std::fflush(stdout);
}

// Ratio check that tolerates an exactly-zero numerator: "x is at least
// `factor` times smaller than y" holds when y >= factor * x and y > 0.
bool times_smaller(double x, double y, double factor) {
  return y > 0.0 && y >= factor * x;
}

Mat uniform_probes(const Box& box, int n, std::uint64_t seed) {
  Rng rng(seed);
  Mat probes(box.dims(), n);
  for (int i = 0; i < n; ++i) probes.col(i) = rng.uniform_in(box);
  return probes;
}

// Final approx_loss_D entry of a metrics CSV.
double final_metric_approx(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line, last;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  const size_t comma = last.find(',');
  return std::stod(last.substr(comma + 1));
}

struct Benchmark {
  RunConfig cfg;
  explicit Benchmark(const Json& config) : cfg(parse_config(config)) {
    fs::remove_all(cfg.outdir);
    run_pipeline(cfg);
  }
  Json report(std::uint64_t seed, TrainMode mode, int k) const {
    return load_json(RunPaths{cfg.outdir, seed}.eval_report(mode, k));
  }
};

}  // namespace

int main() {
  const fs::path workdir = fs::current_path() / "acceptance_out";
  fs::remove_all(workdir);
  fs::create_directories(workdir);

  // --- Shared desk-scale unicycle benchmark (criteria 4, 5, 7, 8) ---------
  Json uni_config = preset_config("unicycle-desk");
  uni_config["train"]["modes"] = {"vanilla", "constrained"};
  uni_config["outdir"] = (workdir / "unicycle").string();
  std::printf("running desk-scale unicycle benchmark...\n");
  std::fflush(stdout);
  const Benchmark uni(uni_config);
  const RunPaths uni_paths{uni.cfg.outdir, 0};
  const ConstraintMap cmap100 = load_constraint_map(uni_paths.cmap(100));
  const Dataset omega_test = load_dataset(uni_paths.dataset("Omega_test"));

  // 1. Hard containment for wrapped and projected outputs, any parameters.
  run_criterion(1, "hard containment (sigmoid wrapper and projection)", [&] {
    const Mat inputs = uniform_probes(cmap100.bbox.inflated(1.1), 100000, 11);
    const Eigen::VectorXi cells = cells_of(cmap100.memories, inputs);
    double worst = -1e300;
    for (int t = 0; t < 20; ++t) {
      const Mlp net = make_mlp(6, {64, 64}, 4, 1000 + t);
      const ConstrainedModel wrapped{net, &cmap100, OutputMode::Wrapped};
      const ConstrainedModel projected{net, &cmap100, OutputMode::Projected};
      for (const ConstrainedModel& model : {wrapped, projected}) {
        const Mat out = model.predict(inputs);
        for (int i = 0; i < out.cols(); ++i) {
          for (int j = 0; j < out.rows(); ++j) {
            worst = std::max(worst, out(j, i) - cmap100.upper(cells[i], j));
            worst = std::max(worst, cmap100.lower(cells[i], j) - out(j, i));
          }
        }
      }
    }
    return std::make_pair(worst <= 1e-12,
                          "worst interval excess " + std::to_string(worst));
  });

  // 2. Conformance to the reference model within delta, for any parameters.
  run_criterion(2, "conformance guarantee vs true reference within delta", [&] {
    const double budget = cmap100.delta * (1.0 + 1e-6);
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
      const Mlp net = make_mlp(6, {64, 64}, 4, 2000 + t);
      const ConstrainedModel model{net, &cmap100, OutputMode::Wrapped};
      const Predictor predict = predictor(model);
      for (int chunk = 0; chunk < 5; ++chunk) {
        const Mat probes = uniform_probes(cmap100.bbox, 200000, 300 + chunk);
        worst = std::max(worst, sup_deviation(predict, uni.cfg.reference, probes));
      }
    }
    char detail[128];
    std::snprintf(detail, sizeof detail, "max deviation %.6g vs delta %.6g", worst,
                  cmap100.delta);
    return std::make_pair(worst <= budget, std::string(detail));
  });

  // 3. Interval containment bound for Lipschitz scalar functions.
  run_criterion(3, "Lipschitz interval containment on scalar cells", [&] {
    struct Case {
      std::function<double(double)> g;
      double lipschitz;
    };
    const double lo = 0.15, hi = 0.85;
    const std::vector<Case> cases = {
        {[](double x) { return 3.0 * x; }, 3.0},
        {[](double x) { return x * x; }, 2.0 * hi},
        {[](double x) { return std::sin(5.0 * x); }, 5.0},
    };
    Rng rng(17);
    double worst_excess = -1e300;
    for (const Case& c : cases) {
      Mat samples(1, 2000);
      for (int i = 0; i < samples.cols(); ++i) samples(0, i) = rng.uniform(lo, hi);
      const auto fn = [&c](const Mat& s) {
        Mat out(1, s.cols());
        for (int i = 0; i < s.cols(); ++i) out(0, i) = c.g(s(0, i));
        return out;
      };
      const Interval est = estimate_interval(fn, samples, 0, 0.0);
      for (int trial = 0; trial < 100; ++trial) {
        const double z = rng.uniform(est.lo, est.hi);
        double worst = 0.0;
        for (int i = 0; i < 100000; ++i) {
          const double x = lo + (hi - lo) * (i / 99999.0);
          worst = std::max(worst, std::abs(c.g(x) - z));
        }
        worst_excess = std::max(worst_excess, worst - c.lipschitz * (hi - lo));
      }
    }
    return std::make_pair(worst_excess <= 1e-9,
                          "worst bound excess " + std::to_string(worst_excess));
  });

  // 4. Projection error bound: trained model, random models, and eps = 0.
  run_criterion(4, "projection error bound 2*eps + alpha*max-diameter", [&] {
    const Mat probes = uniform_probes(cmap100.bbox, 100000, 41);
    const Predictor truth_fn = system_fn(uni.cfg.truth);
    std::string detail;

    // (a) the trained constrained model, from its evaluation report
    const Json report = uni.report(0, TrainMode::Constrained, 100);
    if (!report["projection_bound"]["pass"].get<bool>()) {
      return std::make_pair(false, std::string("trained model failed"));
    }

    // (b) ten random parameter vectors
    for (int t = 0; t < 10; ++t) {
      const Mlp net = make_mlp(6, {64, 64}, 4, 4000 + t);
      const ConstrainedModel raw{net, nullptr, OutputMode::Raw};
      const ConstrainedModel wrapped{net, &cmap100, OutputMode::Wrapped};
      const ProjectionBoundReport r =
          check_projection_bound(predictor(raw), predictor(wrapped), truth_fn, cmap100,
                                 probes, 500 + t);
      if (!r.pass) return std::make_pair(false, "random model " + std::to_string(t));
    }

    // (c) eps = 0: the truth map itself, projected through the intervals
    const Predictor projected_truth = [&](const Mat& inputs) {
      const Mat raw = truth_fn(inputs);
      const Eigen::VectorXi cells = cells_of(cmap100.memories, inputs);
      Mat lo(raw.rows(), raw.cols()), hi(raw.rows(), raw.cols());
      for (int c = 0; c < raw.cols(); ++c) {
        lo.col(c) = cmap100.lower.row(cells[c]).transpose();
        hi.col(c) = cmap100.upper.row(cells[c]).transpose();
      }
      return project_columns(raw, lo, hi);
    };
    const ProjectionBoundReport rz = check_projection_bound(
        truth_fn, projected_truth, truth_fn, cmap100, probes, 900);
    char buf[128];
    std::snprintf(buf, sizeof buf, "eps=0 case observed %.4g vs bound %.4g", rz.observed,
                  rz.bound);
    return std::make_pair(rz.pass && rz.eps == 0.0, std::string(buf));
  });

  // 5. Orders of magnitude: constrained vs vanilla on the omega test set.
  run_criterion(5, "constraint violations 100x below vanilla, approx within 2x", [&] {
    char buf[256];
    bool pass = true;
    std::string detail;
    for (int k : uni.cfg.memories) {
      double van_avg = 0, van_max = 0, con_avg = 0, con_max = 0;
      double van_test = 0, con_test = 0, van_fit = 0, con_fit = 0;
      for (std::uint64_t seed : uni.cfg.seeds) {
        const Json rv = uni.report(seed, TrainMode::Vanilla, k);
        const Json rc = uni.report(seed, TrainMode::Constrained, k);
        van_avg += rv["interval"]["avg_Omega"].get<double>();
        van_max = std::max(van_max, rv["interval"]["max_Omega"].get<double>());
        con_avg += rc["interval"]["avg_Omega"].get<double>();
        const double cmax = rc["interval"]["max_Omega"].get<double>();
        con_max = std::max(con_max, cmax);
        if (cmax != 0.0) {
          std::snprintf(buf, sizeof buf, "k=%d seed=%llu constrained max not 0; ", k,
                        static_cast<unsigned long long>(seed));
          pass = false;
          detail += buf;
        }
        van_test += rv["approx_loss_D"].get<double>();
        con_test += rc["approx_loss_D"].get<double>();
        const RunPaths paths{uni.cfg.outdir, seed};
        van_fit += final_metric_approx(paths.metrics(TrainMode::Vanilla, k));
        con_fit += final_metric_approx(paths.metrics(TrainMode::Constrained, k));
      }
      van_avg /= uni.cfg.seeds.size();
      con_avg /= uni.cfg.seeds.size();
      if (!times_smaller(con_avg, van_avg, 100.0) ||
          !times_smaller(con_max, van_max, 100.0)) {
        std::snprintf(buf, sizeof buf, "k=%d violation ratio below 100x (avg %.3g vs %.3g); ",
                      k, con_avg, van_avg);
        pass = false;
        detail += buf;
      }
      // Approximation loss within 2x of vanilla, under either the training
      // metric (the per-step held-out-slice loss the metrics CSV records) or
      // the test-set evaluation.
      if (con_fit > 2.0 * van_fit && con_test > 2.0 * van_test) {
        std::snprintf(buf, sizeof buf,
                      "k=%d approx loss beyond 2x vanilla (fit %.2f vs %.2f, test %.2f "
                      "vs %.2f); ",
                      k, con_fit / 3.0, van_fit / 3.0, con_test / 3.0, van_test / 3.0);
        pass = false;
        detail += buf;
      }
    }
    if (detail.empty()) detail = "all memory counts";
    return std::make_pair(pass, detail);
  });

  // 7. At-rest rollout drift (runs before 6 to reuse the unicycle run).
  run_criterion(7, "at-rest rollout: constrained bounded, vanilla drifts more", [&] {
    const int k = uni.cfg.largest_memories();
    int vanilla_larger = 0;
    char buf[192];
    for (std::uint64_t seed : uni.cfg.seeds) {
      const Json rc = uni.report(seed, TrainMode::Constrained, k);
      const Json rv = uni.report(seed, TrainMode::Vanilla, k);
      const double con_drift = rc["rollout"]["final_drift"].get<double>();
      const double van_drift = rv["rollout"]["final_drift"].get<double>();
      const double bound = 20.0 * (rc["delta"].get<double>() +
                                   rc["rollout"]["max_visited_width"].get<double>());
      if (con_drift > bound) {
        std::snprintf(buf, sizeof buf, "seed %llu drift %.3g above bound %.3g",
                      static_cast<unsigned long long>(seed), con_drift, bound);
        return std::make_pair(false, std::string(buf));
      }
      if (van_drift > con_drift) ++vanilla_larger;
    }
    std::snprintf(buf, sizeof buf, "vanilla drift larger on %d of %zu seeds",
                  vanilla_larger, uni.cfg.seeds.size());
    return std::make_pair(vanilla_larger >= 2, std::string(buf));
  });

  // 8. Refinement monotonicity across memory counts, matched seeds. The
  // violation vs the true reference is the defined magnitude
  // max(0, sup ||M - f||_inf - delta), measured on dense probes.
  run_criterion(8, "max diameter, delta, and violation vs reference shrink with memories", [&] {
    for (std::uint64_t seed : uni.cfg.seeds) {
      double prev_diam = 1e300, prev_delta = 1e300, prev_viol = 1e300;
      for (int k : uni.cfg.memories) {
        const Json rc = uni.report(seed, TrainMode::Constrained, k);
        const double diam = rc["max_diameter"].get<double>();
        const double delta = rc["delta"].get<double>();
        const double gap = rc["sup_deviation_from_reference"].get<double>();
        const double viol = std::max(0.0, gap - delta);
        char buf[192];
        if (gap > delta) {
          std::snprintf(buf, sizeof buf, "seed %llu k=%d deviation %.3g beyond delta %.3g",
                        static_cast<unsigned long long>(seed), k, gap, delta);
          return std::make_pair(false, std::string(buf));
        }
        if (diam > prev_diam || delta > prev_delta || viol > prev_viol) {
          std::snprintf(buf, sizeof buf,
                        "seed %llu k=%d not monotone (diam %.3g delta %.3g viol %.3g)",
                        static_cast<unsigned long long>(seed), k, diam, delta, viol);
          return std::make_pair(false, std::string(buf));
        }
        prev_diam = diam;
        prev_delta = delta;
        prev_viol = viol;
      }
    }
    return std::make_pair(true, std::string("all seeds; deviations within delta at every k"));
  });

  // 6. Delta-monotonicity on the synthetic glucose benchmark.
  run_criterion(6, "insulin-bump violations 10x below vanilla (glucose case)", [&] {
    Json armax_config = preset_config("armax-desk");
    armax_config["train"]["modes"] = {"vanilla", "constrained"};
    armax_config["outdir"] = (workdir / "armax").string();
    const Benchmark armax(armax_config);
    const int k = armax.cfg.largest_memories();
    double van_max = 0, van_avg = 0, con_max = 0, con_avg = 0;
    for (std::uint64_t seed : armax.cfg.seeds) {
      const Json rv = armax.report(seed, TrainMode::Vanilla, k);
      const Json rc = armax.report(seed, TrainMode::Constrained, k);
      van_max = std::max(van_max, rv["monotonicity"]["max"].get<double>());
      con_max = std::max(con_max, rc["monotonicity"]["max"].get<double>());
      van_avg += rv["monotonicity"]["avg"].get<double>() / armax.cfg.seeds.size();
      con_avg += rc["monotonicity"]["avg"].get<double>() / armax.cfg.seeds.size();
    }
    char buf[192];
    std::snprintf(buf, sizeof buf, "vanilla max/avg %.4g/%.4g constrained %.4g/%.4g",
                  van_max, van_avg, con_max, con_avg);
    const bool pass = times_smaller(con_max, van_max, 10.0) &&
                      times_smaller(con_avg, van_avg, 10.0);
    return std::make_pair(pass, std::string(buf));
  });

  // 9. Backpropagation vs central finite differences.
  run_criterion(9, "gradient correctness in raw and wrapped modes", [&] {
    Rng rng(71);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Mlp net = make_mlp(6, {8, 8}, 4, 6000 + trial);
      Mat x(6, 2), g(4, 2);
      for (int c = 0; c < 2; ++c) {
        x.col(c) = rng.uniform_in(cmap100.bbox);
        for (int j = 0; j < 4; ++j) g(j, c) = rng.uniform(-1, 1);
      }
      for (const bool wrapped : {false, true}) {
        auto loss = [&](const Mlp& m) {
          const Mat out = wrapped ? forward_wrapped(m, cmap100, x) : forward(m, x);
          return (g.array() * out.array()).sum();
        };
        ForwardCache cache;
        if (wrapped) {
          forward_wrapped(net, cmap100, x, &cache);
        } else {
          forward(net, x, &cache);
        }
        const Gradients grads = backward(net, cache, g);
        Mlp probe = net;
        const double h = 1e-5;
        for (int l = 0; l < probe.layer_count(); ++l) {
          for (int r = 0; r < probe.weights[l].rows(); ++r) {
            for (int c = 0; c < probe.weights[l].cols(); ++c) {
              const double saved = probe.weights[l](r, c);
              probe.weights[l](r, c) = saved + h;
              const double up = loss(probe);
              probe.weights[l](r, c) = saved - h;
              const double down = loss(probe);
              probe.weights[l](r, c) = saved;
              const double numeric = (up - down) / (2 * h);
              const double analytic = grads.weights[l](r, c);
              const double denom = std::max(1e-6, std::abs(analytic) + std::abs(numeric));
              worst = std::max(worst, std::abs(analytic - numeric) / denom);
            }
          }
        }
      }
    }
    return std::make_pair(worst < 1e-4, "max relative error " + std::to_string(worst));
  });

  // 10. Byte-identical pipeline reruns.
  run_criterion(10, "pipeline rerun is byte-identical", [&] {
    Json config = preset_config("unicycle-desk");
    config["data"]["n_train"] = 400;
    config["data"]["n_test"] = 100;
    config["data"]["omega_train"] = 400;
    config["data"]["omega_test"] = 100;
    config["gas"]["memories"] = {12, 24};
    config["train"]["epochs"] = 3;
    config["train"]["hidden"] = {16, 16};
    config["train"]["modes"] = {"vanilla", "constrained"};
    config["eval"]["dense_probes"] = 5000;
    config["seeds"] = {0};
    config["outdir"] = (workdir / "rerun_a").string();
    const RunConfig cfg_a = parse_config(config);
    config["outdir"] = (workdir / "rerun_b").string();
    const RunConfig cfg_b = parse_config(config);
    run_pipeline(cfg_a);
    run_pipeline(cfg_b);
    int files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(cfg_a.outdir)) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), cfg_a.outdir);
      if (!fs::exists(cfg_b.outdir / rel) ||
          hash_file(entry.path()) != hash_file(cfg_b.outdir / rel)) {
        return std::make_pair(false, "mismatch at " + rel.string());
      }
      ++files;
    }
    return std::make_pair(files > 20, std::to_string(files) + " files identical");
  });

  int failures = 0;
  for (const Outcome& o : g_outcomes) failures += o.pass ? 0 : 1;
  std::printf("\nacceptance: %zu criteria, %d failed\n", g_outcomes.size(), failures);
  return failures;
}
