#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "conformant/types.hpp"

// Growing neural gas: distills an unlabeled sample set into a graph of
// prototype nodes ("memories") whose edges track the data topology.
namespace conformant {

struct GngParams {
  int max_nodes = 100;
  double eps_winner = 0.05;    // learning rate of the nearest node
  double eps_neighbor = 0.006; // learning rate of its graph neighbors
  int age_max = 50;            // edges older than this are dropped
  int insert_every = 100;      // steps between node insertions
  double alpha_split = 0.5;    // error decay applied to split nodes
  double error_decay = 0.995;  // global per-step error decay
  long iters = 0;              // 0 = auto: insert_every * (max_nodes - 2) + 5000
  bool normalize = false;      // min-max scale dimensions before fitting
  std::uint64_t seed = 0;

  long effective_iters() const {
    return iters > 0 ? iters
                     : static_cast<long>(insert_every) * (max_nodes - 2) + 5000;
  }
};

struct GasEdge {
  int a = 0;
  int b = 0;
  int age = 0;
};

struct NeuralGas {
  std::vector<Vec> nodes;
  std::vector<GasEdge> edges;     // unordered pairs, a < b
  std::vector<double> node_error; // accumulated squared quantization error
  GngParams params;

  int node_count() const { return static_cast<int>(nodes.size()); }

  /// Node positions as rows of a matrix (k x dims).
  Mat node_matrix() const;

  std::vector<std::vector<int>> adjacency() const;
};

/// Fits a growing neural gas to the sample columns. Deterministic per seed.
NeuralGas gng_fit(const Mat& samples, const GngParams& params);

/// Indices of the nearest and second-nearest nodes to s (Euclidean metric,
/// ties resolved toward the lower index).
std::pair<int, int> nearest_two(const NeuralGas& gas, const Vec& s);

/// Mean squared distance from each sample column to its nearest node.
double quantization_error(const NeuralGas& gas, const Mat& samples);

}  // namespace conformant
