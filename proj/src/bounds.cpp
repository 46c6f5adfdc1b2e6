#include "conformant/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conformant/rng.hpp"

namespace conformant {

LipschitzEstimate estimate_lipschitz(const std::function<Mat(const Mat&)>& g,
                                     const Mat& samples, int n_pairs,
                                     double safety_factor, std::uint64_t seed) {
  require(samples.cols() >= 2, "estimate_lipschitz: need at least 2 samples");
  require(n_pairs > 0 && safety_factor > 0.0, "estimate_lipschitz: invalid params");

  Rng rng(substream_seed(seed, "lipschitz"));
  const int n = static_cast<int>(samples.cols());
  double max_ratio = 0.0;

  Mat pair_points(samples.rows(), 2 * n_pairs);
  for (int p = 0; p < n_pairs; ++p) {
    const int a = static_cast<int>(rng.uniform_int(n));
    int b = static_cast<int>(rng.uniform_int(n));
    if (b == a) b = (b + 1) % n;
    pair_points.col(2 * p) = samples.col(a);
    pair_points.col(2 * p + 1) = samples.col(b);
  }
  const Mat pair_values = g(pair_points);
  for (int p = 0; p < n_pairs; ++p) {
    const double dist =
        (pair_points.col(2 * p) - pair_points.col(2 * p + 1)).norm();
    if (dist < 1e-12) continue;
    const double diff = (pair_values.col(2 * p) - pair_values.col(2 * p + 1))
                            .lpNorm<Eigen::Infinity>();
    max_ratio = std::max(max_ratio, diff / dist);
  }

  // Finite-difference probes sharpen the bound where samples are clustered.
  const int n_probes = std::min(n, 200);
  const double scale = std::max(1e-6, Box::hull(samples).diameter());
  const double h = 1e-4 * scale;
  Mat probe_points(samples.rows(), 2 * n_probes);
  for (int p = 0; p < n_probes; ++p) {
    const Vec base = samples.col(rng.uniform_int(n));
    const Vec dir = rng.unit_vector(static_cast<int>(samples.rows()));
    probe_points.col(2 * p) = base;
    probe_points.col(2 * p + 1) = base + h * dir;
  }
  const Mat probe_values = g(probe_points);
  for (int p = 0; p < n_probes; ++p) {
    const double diff = (probe_values.col(2 * p) - probe_values.col(2 * p + 1))
                            .lpNorm<Eigen::Infinity>();
    max_ratio = std::max(max_ratio, diff / h);
  }

  LipschitzEstimate est;
  est.n_pairs = n_pairs;
  est.safety_factor = safety_factor;
  est.value = std::max(safety_factor * max_ratio, 1e-6);
  return est;
}

double analytic_lipschitz(const SystemSpec& model, const Box& bbox) {
  switch (model.kind) {
    case SystemKind::UnicycleModel:
    case SystemKind::UnicycleTruth: {
      // Largest row norm of the step Jacobian over the box; the position rows
      // dominate: sqrt(1 + (v dt)^2 + dt^2).
      require(bbox.dims() == model.input_dim(), "analytic_lipschitz: bbox mismatch");
      const double v_max = std::max(std::abs(bbox.lo[3]), std::abs(bbox.hi[3]));
      const double dt = model.dt;
      double bound = std::sqrt(1.0 + v_max * v_max * dt * dt + dt * dt);
      if (model.kind == SystemKind::UnicycleTruth) {
        // Drag adds 2*c*|v|*dt to the speed row.
        const double speed_row = std::hypot(1.0 + 2.0 * model.drag * v_max * dt, dt);
        bound = std::max(bound, speed_row);
      }
      return bound;
    }
    case SystemKind::ArmaxModel:
      return model.weights.norm();
    case SystemKind::ArmaxTruth:
      // Linear part plus the tanh term's slope bound.
      return model.weights.norm() + std::abs(model.nl_gain) / model.nl_scale;
  }
  throw ConfigError("analytic_lipschitz: unsupported system");
}

Interval estimate_interval(const std::function<Mat(const Mat&)>& model,
                           const Mat& cell_samples, int out_dim, double min_width) {
  require(cell_samples.cols() >= 1, "estimate_interval: empty cell");
  const Mat values = model(cell_samples);
  require(out_dim >= 0 && out_dim < values.rows(), "estimate_interval: bad out_dim");
  Interval iv{values.row(out_dim).minCoeff(), values.row(out_dim).maxCoeff()};
  if (iv.width() < min_width) {
    const double c = iv.mid();
    iv.lo = c - 0.5 * min_width;
    iv.hi = c + 0.5 * min_width;
  }
  return iv;
}

namespace {

// Draws extra in-cell probes near the memory: uniform directions with
// shrinking radius, rejecting draws that land in another cell. Points are
// clipped to the bbox first so intervals stay quoted over sampled space.
int fill_cell_probes(const Mat& memories, int cell, const Box& bbox, int want,
                     Rng& rng, Mat& out) {
  const int dims = static_cast<int>(memories.cols());
  double radius = 0.0;
  for (int i = 0; i < memories.rows(); ++i) {
    if (i == cell) continue;
    const double d = (memories.row(i) - memories.row(cell)).norm();
    if (radius == 0.0 || d < radius) radius = d;
  }
  if (radius == 0.0) radius = bbox.diameter();
  radius = std::max(radius, 1e-9);

  int got = 0;
  const int max_attempts = 80 * want;
  for (int attempt = 0; attempt < max_attempts && got < want; ++attempt) {
    const double r = radius * std::pow(rng.uniform(), 1.0 / dims);
    Vec p = memories.row(cell).transpose() + r * rng.unit_vector(dims);
    p = bbox.clip(p);
    if (cell_of(memories, p) == cell) {
      out.col(got) = p;
      ++got;
    }
  }
  return got;
}

}  // namespace

ConstraintMap build_constraint_map(const SystemSpec& model, const Partition& partition,
                                   const Mat& omega_points, const BoundsConfig& config,
                                   std::uint64_t seed) {
  require(partition.cell_count() >= 1, "build_constraint_map: empty partition");
  require(partition.dims() == model.input_dim(),
          "build_constraint_map: partition dimension mismatch");

  const int k = partition.cell_count();
  const int d = model.output_dim();
  const auto fn = system_fn(model);

  ConstraintMap map;
  map.memories = partition.memories;
  map.bbox = partition.bbox;
  map.diameters = partition.diameters;
  map.lower.resize(k, d);
  map.upper.resize(k, d);
  map.min_width = config.min_width;
  map.seed = seed;

  // Assign the omega points to cells.
  std::vector<std::vector<int>> members(k);
  if (omega_points.cols() > 0) {
    const Eigen::VectorXi owner = cells_of(partition.memories, omega_points);
    for (Eigen::Index c = 0; c < omega_points.cols(); ++c) {
      members[owner[c]].push_back(static_cast<int>(c));
    }
  }

  Rng rng(substream_seed(seed, "cell-probes"));
  std::vector<bool> empty(k, false);
  for (int cell = 0; cell < k; ++cell) {
    const int have = static_cast<int>(members[cell].size());
    const int want_extra = std::max(0, config.min_cell_probes - have);
    Mat extra(partition.dims(), want_extra);
    const int got =
        want_extra > 0
            ? fill_cell_probes(partition.memories, cell, partition.bbox, want_extra,
                               rng, extra)
            : 0;
    Mat probes(partition.dims(), have + got);
    for (int i = 0; i < have; ++i) {
      probes.col(i) = partition.bbox.clip(omega_points.col(members[cell][i]));
    }
    probes.rightCols(got) = extra.leftCols(got);

    if (probes.cols() == 0) {
      empty[cell] = true;
      continue;
    }
    const Mat values = fn(probes);
    for (int j = 0; j < d; ++j) {
      Interval iv{values.row(j).minCoeff(), values.row(j).maxCoeff()};
      if (iv.width() < config.min_width) {
        const double c = iv.mid();
        iv = {c - 0.5 * config.min_width, c + 0.5 * config.min_width};
      }
      map.lower(cell, j) = iv.lo;
      map.upper(cell, j) = iv.hi;
    }
  }

  // Empty cells inherit the nearest nonempty cell's intervals.
  for (int cell = 0; cell < k; ++cell) {
    if (!empty[cell]) continue;
    int donor = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int other = 0; other < k; ++other) {
      if (empty[other]) continue;
      const double dist = (partition.memories.row(cell) - partition.memories.row(other)).norm();
      if (dist < best) {
        best = dist;
        donor = other;
      }
    }
    require(donor >= 0, "build_constraint_map: all cells empty");
    map.lower.row(cell) = map.lower.row(donor);
    map.upper.row(cell) = map.upper.row(donor);
    map.empty_cells.push_back(cell);
  }

  if (config.analytic) {
    map.lipschitz.value = config.safety_factor * analytic_lipschitz(model, partition.bbox);
    map.lipschitz.n_pairs = 0;
    map.lipschitz.safety_factor = config.safety_factor;
  } else {
    Mat pool(partition.dims(), std::max<Eigen::Index>(omega_points.cols(), 2));
    if (omega_points.cols() >= 2) {
      pool = omega_points;
    } else {
      Rng pool_rng(substream_seed(seed, "lipschitz-pool"));
      for (int c = 0; c < pool.cols(); ++c) pool.col(c) = pool_rng.uniform_in(partition.bbox);
    }
    map.lipschitz = estimate_lipschitz(fn, pool, config.lipschitz_pairs,
                                       config.safety_factor, seed);
  }
  map.delta = map.lipschitz.value * partition.max_diameter();
  return map;
}

double conformance_margin(const SystemSpec& model, const Vec& f_value, const Vec& s,
                          double delta) {
  const Vec m = apply_system(model, s);
  require(m.size() == f_value.size(), "conformance_margin: dimension mismatch");
  return delta - (m - f_value).lpNorm<Eigen::Infinity>();
}

}  // namespace conformant
