#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "conformant/types.hpp"

// Seeded randomness. Every consumer derives a named substream from a root
// seed so that reruns of the full pipeline are bit-reproducible and
// independent stages do not share streams.
namespace conformant {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed for the substream (root, name, index).
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name,
                                    std::uint64_t index = 0) {
  std::uint64_t state = root ^ fnv1a64(name);
  state += index * 0x9E3779B97F4A7C15ULL;
  std::uint64_t s = splitmix64(state);
  return splitmix64(state) ^ s;
}

/// mt19937_64-backed generator with explicit, portable conversions to
/// doubles (std::uniform_real_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    require(n > 0, "Rng::uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vec uniform_in(const Box& box) {
    Vec p(box.dims());
    for (int i = 0; i < box.dims(); ++i) p[i] = uniform(box.lo[i], box.hi[i]);
    return p;
  }

  /// Uniformly random unit vector.
  Vec unit_vector(int dims) {
    Vec v(dims);
    double n = 0.0;
    while (n < 1e-12) {
      for (int i = 0; i < dims; ++i) v[i] = normal();
      n = v.norm();
    }
    return v / n;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace conformant
