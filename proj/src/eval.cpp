#include "conformant/eval.hpp"

#include <algorithm>
#include <cmath>

#include "conformant/partition.hpp"
#include "conformant/rng.hpp"
#include "conformant/train.hpp"

namespace conformant {

ViolationSummary constraint_losses(const Predictor& predict, const SystemSpec& model,
                                   const Mat& inputs, double delta) {
  require(inputs.cols() > 0, "constraint_losses: empty dataset");
  const Mat preds = predict(inputs);
  const Mat model_values = apply_system(model, inputs);
  ViolationSummary s;
  for (int i = 0; i < inputs.cols(); ++i) {
    const double dist = (preds.col(i) - model_values.col(i)).lpNorm<Eigen::Infinity>();
    const double v = std::max(0.0, dist - delta);
    s.avg += v;
    s.max = std::max(s.max, v);
  }
  s.avg /= inputs.cols();
  return s;
}

ViolationSummary interval_losses(const Predictor& predict, const ConstraintMap& cmap,
                                 const Mat& inputs) {
  require(inputs.cols() > 0, "interval_losses: empty dataset");
  const Vec v = interval_violations(cmap, inputs, predict(inputs));
  return {v.mean(), v.maxCoeff()};
}

double sup_deviation(const Predictor& predict, const SystemSpec& model,
                     const Mat& probes) {
  require(probes.cols() > 0, "sup_deviation: empty probe set");
  const Mat preds = predict(probes);
  const Mat model_values = apply_system(model, probes);
  double worst = 0.0;
  for (int i = 0; i < probes.cols(); ++i) {
    worst = std::max(worst,
                     (preds.col(i) - model_values.col(i)).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

double approx_loss(const Predictor& predict, const Mat& inputs, const Mat& labels) {
  require(inputs.cols() == labels.cols() && inputs.cols() > 0,
          "approx_loss: shape mismatch");
  const Mat preds = predict(inputs);
  double loss = 0.0;
  for (int i = 0; i < preds.cols(); ++i) loss += (preds.col(i) - labels.col(i)).norm();
  return loss / preds.cols();
}

Rollout rollout(const Predictor& predict, const Vec& start_state, const Mat& controls,
                const ConstraintMap* cmap) {
  const int steps = static_cast<int>(controls.cols());
  require(steps >= 1, "rollout: need at least one step");
  const int state_dim = static_cast<int>(start_state.size());

  Rollout out;
  out.states.resize(state_dim, steps + 1);
  out.states.col(0) = start_state;
  Vec state = start_state;
  for (int t = 0; t < steps; ++t) {
    Vec input(state_dim + controls.rows());
    input << state, controls.col(t);
    if (cmap != nullptr) {
      const int cell = cmap->cell_of(input);
      out.visited_cells.push_back(cell);
      out.max_visited_width = std::max(
          out.max_visited_width,
          (cmap->upper.row(cell) - cmap->lower.row(cell)).maxCoeff());
    }
    state = predict(input);
    out.states.col(t + 1) = state;
    out.positional_drift.push_back(
        (out.states.col(t + 1).head(2) - out.states.col(0).head(2)).norm());
  }
  return out;
}

MonotonicityResult monotonicity_probe(const Predictor& predict, const Mat& inputs,
                                      const std::vector<int>& bump_dims,
                                      double bump_lo, double bump_hi,
                                      std::uint64_t seed) {
  require(inputs.cols() > 0, "monotonicity_probe: empty input set");
  for (int d : bump_dims) {
    require(d >= 0 && d < inputs.rows(), "monotonicity_probe: bad bump dimension");
  }
  Rng rng(substream_seed(seed, "monotonicity"));
  Mat bumped = inputs;
  for (int i = 0; i < inputs.cols(); ++i) {
    const double amount = rng.uniform(bump_lo, bump_hi);
    for (int d : bump_dims) bumped(d, i) += amount;
  }
  const Mat base = predict(inputs);
  const Mat after = predict(bumped);
  require(base.rows() == 1, "monotonicity_probe: expects a scalar prediction");

  MonotonicityResult res;
  for (int i = 0; i < inputs.cols(); ++i) {
    const double rise = std::max(0.0, after(0, i) - base(0, i));
    res.avg_violation += rise;
    res.max_violation = std::max(res.max_violation, rise);
  }
  res.avg_violation /= inputs.cols();
  return res;
}

ProjectionBoundReport check_projection_bound(const Predictor& raw,
                                             const Predictor& constrained,
                                             const Predictor& truth,
                                             const ConstraintMap& cmap,
                                             const Mat& probes, std::uint64_t seed,
                                             double rel_tol) {
  require(probes.cols() > 0, "check_projection_bound: empty probe set");
  const Mat truth_values = truth(probes);
  const Mat raw_values = raw(probes);
  const Mat constrained_values = constrained(probes);

  ProjectionBoundReport report;
  for (int i = 0; i < probes.cols(); ++i) {
    report.eps = std::max(
        report.eps, (raw_values.col(i) - truth_values.col(i)).lpNorm<Eigen::Infinity>());
    report.observed = std::max(
        report.observed,
        (constrained_values.col(i) - truth_values.col(i)).lpNorm<Eigen::Infinity>());
  }

  // Lipschitz estimate of the raw network over a probe subsample.
  const int n_lip = std::min<int>(static_cast<int>(probes.cols()), 4000);
  const int stride = std::max<int>(1, static_cast<int>(probes.cols()) / n_lip);
  Mat subsample(probes.rows(), (probes.cols() + stride - 1) / stride);
  for (int i = 0, c = 0; i < probes.cols(); i += stride, ++c) {
    subsample.col(c) = probes.col(i);
  }
  report.alpha = estimate_lipschitz(raw, subsample, 10000, 1.5, seed).value;
  report.max_diameter = cmap.diameters.maxCoeff();
  report.bound = 2.0 * report.eps + report.alpha * report.max_diameter;
  report.pass = report.observed <= report.bound * (1.0 + rel_tol);
  return report;
}

}  // namespace conformant
