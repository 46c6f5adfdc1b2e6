#include "conformant/partition.hpp"

#include <algorithm>
#include <limits>

namespace conformant {

int cell_of(const Mat& memories, const Vec& s) {
  require(memories.rows() > 0, "cell_of: no memories");
  int best = 0;
  double best_d = (memories.row(0).transpose() - s).squaredNorm();
  for (int i = 1; i < memories.rows(); ++i) {
    const double d = (memories.row(i).transpose() - s).squaredNorm();
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

Eigen::VectorXi cells_of(const Mat& memories, const Mat& points) {
  require(memories.rows() > 0, "cells_of: no memories");
  require(memories.cols() == points.rows(), "cells_of: dimension mismatch");
  const int n = static_cast<int>(points.cols());
  Eigen::VectorXi out(n);
  Vec best = Vec::Constant(n, std::numeric_limits<double>::infinity());
  Vec dist(n);
  for (int i = 0; i < memories.rows(); ++i) {
    dist = (points.colwise() - memories.row(i).transpose()).colwise().squaredNorm();
    for (int c = 0; c < n; ++c) {
      if (dist[c] < best[c]) {
        best[c] = dist[c];
        out[c] = i;
      }
    }
  }
  return out;
}

LinearInequality half_space(const Vec& memory_a, const Vec& memory_b) {
  require(memory_a.size() == memory_b.size(), "half_space: dimension mismatch");
  require(memory_a != memory_b, "half_space: coincident memories");
  LinearInequality h;
  h.normal = memory_a - memory_b;  // positive side holds memory_a
  h.offset = -h.normal.dot(0.5 * (memory_a + memory_b));
  return h;
}

double cell_diameter(const Mat& memories, const std::vector<std::vector<int>>& neighbors,
                     int cell, const Mat& cell_probes) {
  require(cell >= 0 && cell < memories.rows(), "cell_diameter: bad cell index");
  const int n = static_cast<int>(cell_probes.cols());
  if (n >= 2) {
    // Max pairwise distance; subsample deterministically if the cell is huge.
    const int cap = 4000;
    const int stride = n > cap ? (n + cap - 1) / cap : 1;
    double best = 0.0;
    for (int i = 0; i < n; i += stride) {
      for (int j = i + stride; j < n; j += stride) {
        best = std::max(best, (cell_probes.col(i) - cell_probes.col(j)).squaredNorm());
      }
    }
    return std::sqrt(best);
  }
  // Sparse cell: fall back to twice the distance from the memory to the
  // farthest neighbor midpoint, i.e. the farthest neighbor distance.
  double best = 0.0;
  if (cell < static_cast<int>(neighbors.size())) {
    for (int nb : neighbors[cell]) {
      best = std::max(best, (memories.row(cell) - memories.row(nb)).norm());
    }
  }
  if (best == 0.0) {
    for (int i = 0; i < memories.rows(); ++i) {
      if (i == cell) continue;
      const double d = (memories.row(cell) - memories.row(i)).norm();
      if (best == 0.0 || d < best) best = d;
    }
  }
  return best;
}

Partition build_partition(const NeuralGas& gas, const Box& bbox, const Mat& probes) {
  require(gas.node_count() >= 1, "build_partition: empty gas");
  Partition part;
  part.memories = gas.node_matrix();
  part.neighbors = gas.adjacency();
  part.bbox = bbox;

  Mat clipped(probes.rows(), probes.cols());
  for (Eigen::Index c = 0; c < probes.cols(); ++c) {
    clipped.col(c) = bbox.clip(probes.col(c));
  }
  const Eigen::VectorXi owner = cells_of(part.memories, clipped);

  const int k = part.cell_count();
  std::vector<std::vector<int>> members(k);
  for (Eigen::Index c = 0; c < clipped.cols(); ++c) members[owner[c]].push_back(c);

  part.diameters.resize(k);
  for (int cell = 0; cell < k; ++cell) {
    Mat cell_probes(probes.rows(), members[cell].size());
    for (int i = 0; i < static_cast<int>(members[cell].size()); ++i) {
      cell_probes.col(i) = clipped.col(members[cell][i]);
    }
    part.diameters[cell] =
        cell_diameter(part.memories, part.neighbors, cell, cell_probes);
  }
  return part;
}

}  // namespace conformant
