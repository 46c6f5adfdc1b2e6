#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "conformant/bounds.hpp"
#include "conformant/dynamics.hpp"
#include "conformant/types.hpp"

// Evaluation protocol: constraint-loss summaries, open-loop rollouts from
// rest, the insulin-bump monotonicity probe, and the numeric check of the
// projection error bound observed <= 2 eps + alpha * max cell diameter.
namespace conformant {

using Predictor = std::function<Mat(const Mat&)>;

struct ViolationSummary {
  double avg = 0.0;
  double max = 0.0;
};

/// Mean and max violation of the conformance constraint over the inputs:
/// max(0, ||M(s) - f(s)||_inf - delta).
ViolationSummary constraint_losses(const Predictor& predict, const SystemSpec& model,
                                   const Mat& inputs, double delta);

/// Mean and max distance of predictions outside their cell intervals.
ViolationSummary interval_losses(const Predictor& predict, const ConstraintMap& cmap,
                                 const Mat& inputs);

/// Largest deviation from the reference model over the probe columns.
double sup_deviation(const Predictor& predict, const SystemSpec& model,
                     const Mat& probes);

/// Mean Euclidean-norm prediction error on a labeled set.
double approx_loss(const Predictor& predict, const Mat& inputs, const Mat& labels);

struct Rollout {
  Mat states;               // state_dim x (steps + 1)
  std::vector<double> positional_drift;  // displacement from start, per step
  std::vector<int> visited_cells;
  double max_visited_width = 0.0;

  double final_drift() const {
    return positional_drift.empty() ? 0.0 : positional_drift.back();
  }
};

/// Open-loop rollout: feeds the model's own predicted state back, applying
/// the control columns in order. Returns steps+1 states. Drift is the
/// Euclidean displacement of the first two state entries from the start.
Rollout rollout(const Predictor& predict, const Vec& start_state, const Mat& controls,
                const ConstraintMap* cmap = nullptr);

struct MonotonicityResult {
  double max_violation = 0.0;
  double avg_violation = 0.0;
};

/// Bumps every listed coordinate of each input column by one seeded uniform
/// draw in [bump_lo, bump_hi] and reports how much the (scalar) prediction
/// rose; a conformant model must not increase.
MonotonicityResult monotonicity_probe(const Predictor& predict, const Mat& inputs,
                                      const std::vector<int>& bump_dims,
                                      double bump_lo, double bump_hi,
                                      std::uint64_t seed);

struct ProjectionBoundReport {
  double eps = 0.0;          // sup ||f_raw - f_truth||_inf over the probes
  double alpha = 0.0;        // Lipschitz estimate of the raw network
  double max_diameter = 0.0;
  double bound = 0.0;        // 2 eps + alpha * max_diameter
  double observed = 0.0;     // sup ||f_constrained - f_truth||_inf
  bool pass = false;
};

/// Numeric verification that constraining a model adds at most
/// 2 eps + alpha * max-diameter of approximation error, on dense probes.
ProjectionBoundReport check_projection_bound(const Predictor& raw,
                                             const Predictor& constrained,
                                             const Predictor& truth,
                                             const ConstraintMap& cmap,
                                             const Mat& probes, std::uint64_t seed,
                                             double rel_tol = 1e-9);

}  // namespace conformant
