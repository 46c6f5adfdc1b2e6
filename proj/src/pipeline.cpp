#include "conformant/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include "conformant/eval.hpp"
#include "conformant/partition.hpp"
#include "conformant/rng.hpp"

namespace conformant {

int RunConfig::largest_memories() const {
  return *std::max_element(memories.begin(), memories.end());
}

Json preset_config(const std::string& name) {
  Json base{
      {"system",
       {{"name", "unicycle-truth"}, {"dt", 0.1}, {"drag", 0.05}, {"heading_bias", 0.01}}},
      {"data",
       {{"n_train", 1500},
        {"n_test", 200},
        {"omega_train", 1500},
        {"omega_test", 200},
        {"horizon", 30},
        {"emphasis_fraction", 0.5}}},
      {"gas",
       {{"memories", {50, 100, 250}},
        {"eps_winner", 0.05},
        {"eps_neighbor", 0.006},
        {"age_max", 50},
        {"insert_every", 100},
        {"alpha_split", 0.5},
        {"error_decay", 0.995},
        {"iters", 0},
        {"normalize", false}}},
      {"bounds",
       {{"eta", 1e-4}, {"safety_factor", 1.5}, {"min_cell_probes", 50}, {"analytic", true}}},
      {"train",
       {{"modes", {"vanilla", "auglag", "constrained"}},
        {"epochs", 100},
        {"batch", 64},
        {"lr", 0.01},
        {"lr_grid", {0.01, 0.03}},
        {"hidden", {64, 64}},
        {"holdout_fraction", 0.1},
        {"mu_growth", 2.0},
        {"mu_cap", 1e4}}},
      {"eval",
       {{"rollout_steps", 20},
        {"dense_probes", 100000},
        {"bump_lo", 0.6},
        {"bump_hi", 1.0}}},
      {"seeds", {0, 1, 2}},
      {"outdir", "runs/unicycle-desk"},
  };
  if (name == "unicycle-desk") return base;
  if (name == "unicycle-paper") {
    base["data"]["n_train"] = 15000;
    base["data"]["n_test"] = 2000;
    base["data"]["omega_train"] = 15000;
    base["data"]["omega_test"] = 2000;
    base["gas"]["memories"] = {500, 1000, 2500};
    base["train"]["hidden"] = {1024, 1024};
    base["train"]["epochs"] = 60;
    base["outdir"] = "runs/unicycle-paper";
    return base;
  }
  if (name == "armax-desk" || name == "armax-paper") {
    base["system"] = {{"name", "armax-truth"}};
    base["data"]["horizon"] = 25;
    base["train"]["hidden"] = {20, 20, 20};
    base["train"]["epochs"] = 60;
    if (name == "armax-desk") {
      base["data"]["n_train"] = 1875;
      base["data"]["n_test"] = 250;
      base["data"]["omega_train"] = 1875;
      base["data"]["omega_test"] = 250;
      base["gas"]["memories"] = {100, 150, 200};
      base["outdir"] = "runs/armax-desk";
    } else {
      base["data"]["n_train"] = 18750;
      base["data"]["n_test"] = 2500;
      base["data"]["omega_train"] = 18750;
      base["data"]["omega_test"] = 2500;
      base["gas"]["memories"] = {1000, 1500, 2000};
      base["outdir"] = "runs/armax-paper";
    }
    return base;
  }
  throw ConfigError("unknown preset: " + name);
}

void merge_config(Json& base, const Json& overlay) {
  if (!overlay.is_object() || !base.is_object()) {
    base = overlay;
    return;
  }
  for (const auto& [key, value] : overlay.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      merge_config(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

RunConfig parse_config(const Json& config) {
  RunConfig cfg;
  cfg.raw = config;
  cfg.hash = config_hash_of(config);

  const Json& system = config.at("system");
  const std::string name = system.at("name").get<std::string>();
  if (name == "unicycle-truth") {
    cfg.truth = make_unicycle_truth(system.value("dt", 0.1), system.value("drag", 0.05),
                                    system.value("heading_bias", 0.01));
    cfg.reference = make_unicycle_model(system.value("dt", 0.1));
  } else if (name == "armax-truth") {
    cfg.truth = make_armax_truth();
    cfg.reference = make_armax_model();
  } else {
    throw ConfigError("system.name must be a truth system, got: " + name);
  }

  const Json& data = config.at("data");
  cfg.n_train = data.at("n_train").get<int>();
  cfg.n_test = data.at("n_test").get<int>();
  cfg.omega_train = data.at("omega_train").get<int>();
  cfg.omega_test = data.at("omega_test").get<int>();
  cfg.horizon = data.at("horizon").get<int>();
  cfg.emphasis_fraction = data.at("emphasis_fraction").get<double>();

  const Json& gas = config.at("gas");
  cfg.memories = gas.at("memories").get<std::vector<int>>();
  require(!cfg.memories.empty(), "config: gas.memories must be nonempty");
  cfg.gas.eps_winner = gas.at("eps_winner").get<double>();
  cfg.gas.eps_neighbor = gas.at("eps_neighbor").get<double>();
  cfg.gas.age_max = gas.at("age_max").get<int>();
  cfg.gas.insert_every = gas.at("insert_every").get<int>();
  cfg.gas.alpha_split = gas.at("alpha_split").get<double>();
  cfg.gas.error_decay = gas.at("error_decay").get<double>();
  cfg.gas.iters = gas.at("iters").get<long>();
  cfg.gas.normalize = gas.at("normalize").get<bool>();

  const Json& bounds = config.at("bounds");
  cfg.bounds.min_width = bounds.at("eta").get<double>();
  cfg.bounds.safety_factor = bounds.at("safety_factor").get<double>();
  cfg.bounds.min_cell_probes = bounds.at("min_cell_probes").get<int>();
  cfg.bounds.analytic = bounds.at("analytic").get<bool>();

  const Json& train = config.at("train");
  cfg.modes.clear();
  for (const Json& mode : train.at("modes")) {
    cfg.modes.push_back(train_mode_from_string(mode.get<std::string>()));
  }
  cfg.train.epochs = train.at("epochs").get<int>();
  cfg.train.batch = train.at("batch").get<int>();
  cfg.train.lr = train.at("lr").get<double>();
  cfg.train.lr_grid = train.at("lr_grid").get<std::vector<double>>();
  cfg.train.hidden = train.at("hidden").get<std::vector<int>>();
  cfg.train.holdout_fraction = train.at("holdout_fraction").get<double>();
  cfg.train.mu_growth = train.at("mu_growth").get<double>();
  cfg.train.mu_cap = train.at("mu_cap").get<double>();

  const Json& eval = config.at("eval");
  cfg.rollout_steps = eval.at("rollout_steps").get<int>();
  cfg.dense_probes = eval.at("dense_probes").get<int>();
  cfg.bump_lo = eval.at("bump_lo").get<double>();
  cfg.bump_hi = eval.at("bump_hi").get<double>();

  cfg.seeds = config.at("seeds").get<std::vector<std::uint64_t>>();
  require(!cfg.seeds.empty(), "config: seeds must be nonempty");
  cfg.outdir = config.at("outdir").get<std::string>();
  return cfg;
}

std::filesystem::path RunPaths::seed_dir() const {
  return root / ("seed" + std::to_string(seed));
}
std::filesystem::path RunPaths::dataset(const std::string& name) const {
  return seed_dir() / "data" / (name + ".csv");
}
std::filesystem::path RunPaths::gas(int memories) const {
  return seed_dir() / "gas" / ("gas_k" + std::to_string(memories) + ".json");
}
std::filesystem::path RunPaths::cmap(int memories) const {
  return seed_dir() / "bounds" / ("cmap_k" + std::to_string(memories) + ".json");
}
namespace {
std::string model_tag(TrainMode mode, int memories) {
  return mode == TrainMode::Vanilla ? to_string(mode)
                                    : to_string(mode) + "_k" + std::to_string(memories);
}
}  // namespace
std::filesystem::path RunPaths::model(TrainMode mode, int memories) const {
  return seed_dir() / "models" / (model_tag(mode, memories) + ".json");
}
std::filesystem::path RunPaths::metrics(TrainMode mode, int memories) const {
  return seed_dir() / "metrics" / (model_tag(mode, memories) + ".csv");
}
std::filesystem::path RunPaths::eval_report(TrainMode mode, int memories) const {
  return seed_dir() / "eval" /
         ("report_" + to_string(mode) + "_k" + std::to_string(memories) + ".json");
}
std::filesystem::path RunPaths::rollout_csv(TrainMode mode, int memories) const {
  return seed_dir() / "eval" /
         ("rollout_" + to_string(mode) + "_k" + std::to_string(memories) + ".csv");
}

namespace {

GngParams gas_params_for(const RunConfig& cfg, int memories, std::uint64_t seed) {
  GngParams p = cfg.gas;
  p.max_nodes = memories;
  p.seed = substream_seed(seed, "gas", memories);
  if (p.iters <= 0) {
    // Shared budget across memory counts so that fits with matched seeds see
    // the same sample sequence.
    p.iters = static_cast<long>(p.insert_every) * (cfg.largest_memories() - 2) + 5000;
  }
  return p;
}

void check_hash(const std::string& artifact_hash, const RunConfig& cfg,
                const std::filesystem::path& path) {
  if (artifact_hash != cfg.hash) {
    throw InvariantError("config hash mismatch for " + path.string() + " (artifact " +
                         artifact_hash + ", config " + cfg.hash + ")");
  }
}

Mat dense_probe_matrix(const RunConfig& cfg, const Box& bbox, std::uint64_t seed) {
  Rng rng(substream_seed(seed, "eval-probes"));
  Mat probes(bbox.dims(), cfg.dense_probes);
  for (int i = 0; i < cfg.dense_probes; ++i) probes.col(i) = rng.uniform_in(bbox);
  return probes;
}

std::vector<int> emphasis_members(const Box& region, const Mat& inputs) {
  std::vector<int> members;
  for (int i = 0; i < inputs.cols(); ++i) {
    if (region.contains(inputs.col(i))) members.push_back(i);
  }
  return members;
}

}  // namespace

int cmd_gen_data(const RunConfig& cfg) {
  for (std::uint64_t seed : cfg.seeds) {
    RunPaths paths{cfg.outdir, seed};
    Dataset d_train =
        generate_labeled(cfg.truth, cfg.n_train, cfg.horizon, substream_seed(seed, "data", 0));
    Dataset d_test =
        generate_labeled(cfg.truth, cfg.n_test, cfg.horizon, substream_seed(seed, "data", 1));
    const Box emphasis = default_emphasis(cfg.truth, d_train.bbox);
    Dataset om_train = generate_unlabeled(d_train.bbox, cfg.omega_train, emphasis,
                                          cfg.emphasis_fraction, substream_seed(seed, "data", 2));
    Dataset om_test = generate_unlabeled(d_train.bbox, cfg.omega_test, emphasis,
                                         cfg.emphasis_fraction, substream_seed(seed, "data", 3));
    save_dataset(paths.dataset("D_train"), d_train, cfg.hash);
    save_dataset(paths.dataset("D_test"), d_test, cfg.hash);
    save_dataset(paths.dataset("Omega_train"), om_train, cfg.hash);
    save_dataset(paths.dataset("Omega_test"), om_test, cfg.hash);
    std::cout << "gen-data seed " << seed << ": " << d_train.count() << "/"
              << d_test.count() << " labeled, " << om_train.count() << "/"
              << om_test.count() << " unlabeled\n";
  }
  return 0;
}

int cmd_fit_gas(const RunConfig& cfg) {
  for (std::uint64_t seed : cfg.seeds) {
    RunPaths paths{cfg.outdir, seed};
    const Dataset omega = load_dataset(paths.dataset("Omega_train"));
    for (int k : cfg.memories) {
      const GngParams params = gas_params_for(cfg, k, seed);
      const NeuralGas gas = gng_fit(omega.inputs, params);
      const double qerr = quantization_error(gas, omega.inputs);
      save_gas(paths.gas(k), gas, qerr, cfg.hash);
      std::cout << "fit-gas seed " << seed << " k " << k << ": " << gas.node_count()
                << " memories, quantization error " << qerr << "\n";
    }
  }
  return 0;
}

int cmd_build_bounds(const RunConfig& cfg) {
  for (std::uint64_t seed : cfg.seeds) {
    RunPaths paths{cfg.outdir, seed};
    const Dataset omega = load_dataset(paths.dataset("Omega_train"));
    for (int k : cfg.memories) {
      const NeuralGas gas = load_gas(paths.gas(k));
      const int n_uniform = std::max(10000, 20 * k);
      Rng rng(substream_seed(seed, "probe", k));
      Mat probes(omega.input_dim(), omega.count() + n_uniform);
      probes.leftCols(omega.count()) = omega.inputs;
      for (int i = 0; i < n_uniform; ++i) {
        probes.col(omega.count() + i) = rng.uniform_in(omega.bbox);
      }
      const Partition partition = build_partition(gas, omega.bbox, probes);
      ConstraintMap cmap = build_constraint_map(cfg.reference, partition, omega.inputs,
                                                cfg.bounds, substream_seed(seed, "bounds", k));
      cmap.config_hash = cfg.hash;
      save_constraint_map(paths.cmap(k), cmap);
      std::cout << "build-bounds seed " << seed << " k " << k << ": delta " << cmap.delta
                << ", max diameter " << partition.max_diameter() << ", "
                << cmap.empty_cells.size() << " empty cells\n";
    }
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::optional<std::string>& only_mode) {
  std::optional<TrainMode> filter;
  if (only_mode) filter = train_mode_from_string(*only_mode);
  for (std::uint64_t seed : cfg.seeds) {
    RunPaths paths{cfg.outdir, seed};
    const Dataset d_train = load_dataset(paths.dataset("D_train"));
    const Dataset om_train = load_dataset(paths.dataset("Omega_train"));
    for (TrainMode mode : cfg.modes) {
      if (filter && mode != *filter) continue;
      const std::vector<int> ks =
          mode == TrainMode::Vanilla ? std::vector<int>{cfg.largest_memories()} : cfg.memories;
      for (int k : ks) {
        const ConstraintMap cmap = load_constraint_map(paths.cmap(k));
        check_hash(cmap.config_hash, cfg, paths.cmap(k));
        // The train substream is independent of the memory count: matched
        // seeds share the net init and batch order across partitions.
        TrainConfig tc = cfg.train;
        tc.mode = mode;
        tc.seed = substream_seed(seed, "train-" + to_string(mode));
        const TrainResult result = train(tc, d_train, om_train, cfg.reference, &cmap);

        ModelArtifact artifact;
        artifact.net = result.net;
        artifact.mode = result.mode;
        artifact.cmap_path =
            std::filesystem::relative(paths.cmap(k), cfg.outdir).string();
        artifact.seed = seed;
        artifact.config_hash = cfg.hash;
        save_model(paths.model(mode, k), artifact);
        save_metrics(paths.metrics(mode, k), result.history);
        std::cout << "train seed " << seed << " " << model_tag(mode, k)
                  << ": final approx loss " << result.history.back().approx_loss_D
                  << ", max cviol Omega " << result.history.back().max_cviol_Omega
                  << "\n";
      }
    }
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  for (std::uint64_t seed : cfg.seeds) {
    RunPaths paths{cfg.outdir, seed};
    const Dataset d_test = load_dataset(paths.dataset("D_test"));
    const Dataset om_test = load_dataset(paths.dataset("Omega_test"));
    const Mat dense = dense_probe_matrix(cfg, om_test.bbox, seed);

    for (TrainMode mode : cfg.modes) {
      const int model_k =
          mode == TrainMode::Vanilla ? cfg.largest_memories() : 0;  // vanilla: one model
      for (int k : cfg.memories) {
        const auto model_path =
            paths.model(mode, mode == TrainMode::Vanilla ? model_k : k);
        const ModelArtifact artifact = load_model(model_path);
        check_hash(artifact.config_hash, cfg, model_path);
        const ConstraintMap cmap = load_constraint_map(paths.cmap(k));
        check_hash(cmap.config_hash, cfg, paths.cmap(k));

        ConstrainedModel model{artifact.net, &cmap, artifact.mode};
        const Predictor predict = predictor(model);

        Json report;
        report["mode"] = to_string(mode);
        report["memories"] = k;
        report["seed"] = seed;
        report["approx_loss_D"] = approx_loss(predict, d_test.inputs, d_test.labels);
        const ViolationSummary cd_d =
            constraint_losses(predict, cfg.reference, d_test.inputs, cmap.delta);
        const ViolationSummary cd_om =
            constraint_losses(predict, cfg.reference, om_test.inputs, cmap.delta);
        const ViolationSummary iv_d = interval_losses(predict, cmap, d_test.inputs);
        const ViolationSummary iv_om = interval_losses(predict, cmap, om_test.inputs);
        report["cdelta"] = Json{{"avg_D", cd_d.avg},
                                {"max_D", cd_d.max},
                                {"avg_Omega", cd_om.avg},
                                {"max_Omega", cd_om.max}};
        report["interval"] = Json{{"avg_D", iv_d.avg},
                                  {"max_D", iv_d.max},
                                  {"avg_Omega", iv_om.avg},
                                  {"max_Omega", iv_om.max}};
        report["sup_deviation_from_reference"] =
            sup_deviation(predict, cfg.reference, dense);
        report["delta"] = cmap.delta;
        report["max_diameter"] = cmap.diameters.maxCoeff();
        report["max_interval_width"] = cmap.max_width();

        if (cfg.is_unicycle()) {
          Vec rest = Vec::Zero(4);
          Mat controls = Mat::Zero(2, cfg.rollout_steps);
          const Rollout roll = rollout(predict, rest, controls, &cmap);
          report["rollout"] = Json{{"final_drift", roll.final_drift()},
                                   {"max_visited_width", roll.max_visited_width},
                                   {"drift", roll.positional_drift}};
          std::filesystem::create_directories(paths.rollout_csv(mode, k).parent_path());
          auto out = std::ofstream(paths.rollout_csv(mode, k));
          if (!out) throw IoError("cannot write " + paths.rollout_csv(mode, k).string());
          out << "step,x,y,heading,speed,drift\n";
          for (int t = 0; t <= cfg.rollout_steps; ++t) {
            out << t;
            for (int r = 0; r < roll.states.rows(); ++r) {
              out << "," << format_double(roll.states(r, t));
            }
            out << ","
                << format_double(t == 0 ? 0.0 : roll.positional_drift[t - 1]) << "\n";
          }
        } else {
          // Monotonicity probe on the emphasis-region slice of the test set.
          const Box region = default_emphasis(cfg.truth, om_test.bbox);
          std::vector<int> members = emphasis_members(region, d_test.inputs);
          const Mat& pool = members.empty() ? om_test.inputs : d_test.inputs;
          if (members.empty()) members = emphasis_members(region, om_test.inputs);
          require(!members.empty(), "cmd_eval: no emphasis-region probe points");
          Mat probes(pool.rows(), members.size());
          for (size_t i = 0; i < members.size(); ++i) probes.col(i) = pool.col(members[i]);
          std::vector<int> bump_dims;
          for (int i = kArmaxInsulinBegin; i < kArmaxInsulinEnd; ++i) bump_dims.push_back(i);
          const MonotonicityResult mono = monotonicity_probe(
              predict, probes, bump_dims, cfg.bump_lo, cfg.bump_hi,
              substream_seed(seed, "eval-mono"));
          report["monotonicity"] =
              Json{{"max", mono.max_violation}, {"avg", mono.avg_violation},
                   {"probes", members.size()}};
        }

        if (mode == TrainMode::Constrained) {
          ConstrainedModel raw_model{artifact.net, nullptr, OutputMode::Raw};
          const ProjectionBoundReport thm = check_projection_bound(
              predictor(raw_model), predict, system_fn(cfg.truth), cmap, dense,
              substream_seed(seed, "eval-thm", k));
          report["projection_bound"] = Json{{"eps", thm.eps},
                                            {"alpha", thm.alpha},
                                            {"max_diameter", thm.max_diameter},
                                            {"bound", thm.bound},
                                            {"observed", thm.observed},
                                            {"pass", thm.pass}};
        }
        report["config_hash"] = cfg.hash;
        save_json(paths.eval_report(mode, k), report);
        std::cout << "eval seed " << seed << " " << to_string(mode) << " k " << k
                  << ": iviol Omega avg " << iv_om.avg << " max " << iv_om.max << "\n";
      }
    }
  }
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  std::ofstream out(cfg.outdir / "summary.csv");
  if (!out) throw IoError("cannot write summary.csv under " + cfg.outdir.string());
  out << "mode,memories,seed,approx_loss_D,avg_iviol_Omega,max_iviol_Omega,"
         "avg_cdelta_Omega,max_cdelta_Omega,sup_deviation,delta,max_diameter,"
         "rollout_drift,mono_max,mono_avg\n";
  std::cout << "method            memories seed  max violation  avg violation\n";
  for (std::uint64_t seed : cfg.seeds) {
    RunPaths paths{cfg.outdir, seed};
    for (TrainMode mode : cfg.modes) {
      for (int k : cfg.memories) {
        const Json r = load_json(paths.eval_report(mode, k));
        const bool unicycle = r.contains("rollout");
        const double mono_max = unicycle ? 0.0 : r["monotonicity"]["max"].get<double>();
        const double mono_avg = unicycle ? 0.0 : r["monotonicity"]["avg"].get<double>();
        out << r["mode"].get<std::string>() << "," << k << "," << seed << ","
            << format_double(r["approx_loss_D"].get<double>()) << ","
            << format_double(r["interval"]["avg_Omega"].get<double>()) << ","
            << format_double(r["interval"]["max_Omega"].get<double>()) << ","
            << format_double(r["cdelta"]["avg_Omega"].get<double>()) << ","
            << format_double(r["cdelta"]["max_Omega"].get<double>()) << ","
            << format_double(r["sup_deviation_from_reference"].get<double>()) << ","
            << format_double(r["delta"].get<double>()) << ","
            << format_double(r["max_diameter"].get<double>()) << ","
            << (unicycle ? format_double(r["rollout"]["final_drift"].get<double>()) : "")
            << "," << format_double(mono_max) << "," << format_double(mono_avg) << "\n";
        const double shown_max =
            unicycle ? r["interval"]["max_Omega"].get<double>() : mono_max;
        const double shown_avg =
            unicycle ? r["interval"]["avg_Omega"].get<double>() : mono_avg;
        std::printf("%-18s %7d %4llu %14.6g %14.6g\n",
                    r["mode"].get<std::string>().c_str(), k,
                    static_cast<unsigned long long>(seed), shown_max, shown_avg);
      }
    }
  }
  return 0;
}

int run_pipeline(const RunConfig& cfg) {
  cmd_gen_data(cfg);
  cmd_fit_gas(cfg);
  cmd_build_bounds(cfg);
  cmd_train(cfg, std::nullopt);
  cmd_eval(cfg);
  cmd_report(cfg);
  return 0;
}

}  // namespace conformant
