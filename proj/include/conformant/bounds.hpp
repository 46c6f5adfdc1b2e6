#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "conformant/dynamics.hpp"
#include "conformant/partition.hpp"
#include "conformant/types.hpp"

// Per-cell interval approximation of the reference model's outputs, Lipschitz
// estimation, and the conformance slack delta. The resulting constraint map
// assigns every input-space cell a d-dimensional output interval.
namespace conformant {

struct LipschitzEstimate {
  double value = 0.0;        // final bound, safety factor included
  int n_pairs = 0;           // sampled pairs used (0 for analytic bounds)
  double safety_factor = 1.0;
};

/// Sampled Lipschitz bound of g (infinity norm over outputs, Euclidean over
/// inputs): safety_factor times the max difference quotient over random
/// sample pairs plus finite-difference probes at the samples.
LipschitzEstimate estimate_lipschitz(const std::function<Mat(const Mat&)>& g,
                                     const Mat& samples, int n_pairs,
                                     double safety_factor, std::uint64_t seed);

/// Closed-form Lipschitz bound for the analytic reference models, evaluated
/// over the given bounding box. Throws for systems without one.
double analytic_lipschitz(const SystemSpec& model, const Box& bbox);

/// Sampled [min, max] of output dimension `out_dim` of M over the cell
/// sample columns, inflated symmetrically to at least width `min_width`.
Interval estimate_interval(const std::function<Mat(const Mat&)>& model,
                           const Mat& cell_samples, int out_dim, double min_width);

/// Per-cell output intervals plus the global slack delta = L * max diameter.
struct ConstraintMap {
  Mat memories;   // copied from the partition for self-contained lookup
  Box bbox;
  Vec diameters;
  Mat lower;      // k x d
  Mat upper;      // k x d
  double delta = 0.0;
  LipschitzEstimate lipschitz;
  double min_width = 1e-4;
  std::vector<int> empty_cells;  // cells that inherited a neighbor's intervals
  std::uint64_t seed = 0;
  std::string config_hash;

  int cell_count() const { return static_cast<int>(memories.rows()); }
  int output_dim() const { return static_cast<int>(lower.cols()); }
  int input_dim() const { return static_cast<int>(memories.cols()); }

  int cell_of(const Vec& s) const { return conformant::cell_of(memories, s); }

  double max_width() const {
    return (upper - lower).maxCoeff();
  }
};

struct BoundsConfig {
  double min_width = 1e-4;     // eta: floor on interval widths
  double safety_factor = 1.5;
  int min_cell_probes = 50;
  int lipschitz_pairs = 10000;
  bool analytic = true;        // use the closed-form bound when available
};

/// Builds the constraint map for reference model `model` over the partition.
/// Each cell is probed with its assigned omega points plus fresh in-cell
/// draws until `min_cell_probes` probes are available (or attempts run out);
/// cells left without probes inherit the nearest nonempty cell's intervals.
ConstraintMap build_constraint_map(const SystemSpec& model, const Partition& partition,
                                   const Mat& omega_points, const BoundsConfig& config,
                                   std::uint64_t seed);

/// Conformance margin: delta - ||M(s) - f_value||_inf. The constraint holds
/// iff the margin is positive.
double conformance_margin(const SystemSpec& model, const Vec& f_value, const Vec& s,
                          double delta);

}  // namespace conformant
