#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

// Core dense types. Convention throughout the library: sample matrices hold
// one sample per column (dims x count).
namespace conformant {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Axis-aligned box, used for input-space bounding boxes and sampling regions.
struct Box {
  Vec lo;
  Vec hi;

  int dims() const { return static_cast<int>(lo.size()); }

  bool contains(const Vec& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() &&
           (p.array() <= hi.array() + tol).all();
  }

  Vec clip(const Vec& p) const { return p.cwiseMax(lo).cwiseMin(hi); }

  Vec side_lengths() const { return hi - lo; }

  double diameter() const { return (hi - lo).norm(); }

  /// Intersection with another box; throws if the result is empty.
  Box intersect(const Box& other) const {
    Box out{lo.cwiseMax(other.lo), hi.cwiseMin(other.hi)};
    require((out.lo.array() <= out.hi.array()).all(),
            "Box::intersect: empty intersection");
    return out;
  }

  Box inflated(double factor) const {
    Vec c = 0.5 * (lo + hi);
    Vec h = 0.5 * factor * (hi - lo);
    return Box{c - h, c + h};
  }

  /// Per-dimension min/max hull of a set of column points.
  static Box hull(const Mat& points) {
    require(points.cols() > 0, "Box::hull: no points");
    return Box{points.rowwise().minCoeff(), points.rowwise().maxCoeff()};
  }
};

/// Closed scalar interval.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }
};

}  // namespace conformant
