#pragma once

#include <vector>

#include "conformant/gas.hpp"
#include "conformant/types.hpp"

// Voronoi tessellation induced by the gas memories: membership lookup,
// perpendicular-bisector half-spaces, and bbox-clipped cell diameters.
namespace conformant {

/// Half-space H(s) := normal . s + offset > 0.
struct LinearInequality {
  Vec normal;
  double offset = 0.0;

  double eval(const Vec& s) const { return normal.dot(s) + offset; }
};

struct Partition {
  Mat memories;                         // k x dims, one memory per row
  std::vector<std::vector<int>> neighbors;  // gas edges per memory
  Box bbox;
  Vec diameters;                        // bbox-clipped cell diameter estimates

  int cell_count() const { return static_cast<int>(memories.rows()); }
  int dims() const { return static_cast<int>(memories.cols()); }
  double max_diameter() const { return diameters.maxCoeff(); }
};

/// Index of the memory nearest to s; ties go to the lower index.
int cell_of(const Mat& memories, const Vec& s);
inline int cell_of(const Partition& partition, const Vec& s) {
  return cell_of(partition.memories, s);
}

/// Batched membership for sample columns.
Eigen::VectorXi cells_of(const Mat& memories, const Mat& points);

/// Perpendicular bisector between two memories, oriented so that
/// half_space(a, b).eval(s) > 0 iff s is strictly closer to a.
LinearInequality half_space(const Vec& memory_a, const Vec& memory_b);

/// Largest pairwise distance among the probe columns assigned to the cell.
/// Cells holding fewer than two probes fall back to twice the distance from
/// the memory to its farthest neighbor midpoint.
double cell_diameter(const Mat& memories, const std::vector<std::vector<int>>& neighbors,
                     int cell, const Mat& cell_probes);

/// Assembles the partition and estimates every cell diameter from the probe
/// columns (clipped to the bbox).
Partition build_partition(const NeuralGas& gas, const Box& bbox, const Mat& probes);

}  // namespace conformant
