#pragma once

#include "coseg/types.hpp"

#include <random>

namespace coseg {

/// Deterministic RNG. The mt19937_64 stream is fully specified by the
/// standard; the mappings below avoid <random> distributions, whose output
/// is implementation-defined, so seeded runs are reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform in [0,1).
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  std::int64_t below(std::int64_t n) {
    auto v = static_cast<std::int64_t>(uniform01() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
  }

  Vec3 in_box(const Vec3& lo, const Vec3& hi) {
    return {uniform(lo.x(), hi.x()), uniform(lo.y(), hi.y()),
            uniform(lo.z(), hi.z())};
  }

  /// Uniform direction on the unit sphere (rejection-free, via z + azimuth).
  Vec3 unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * M_PI);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

  double normal() {
    // Box-Muller; deterministic given the stream.
    const double u1 = std::max(uniform01(), 0x1.0p-60);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace coseg
