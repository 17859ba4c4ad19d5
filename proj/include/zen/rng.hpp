#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace zen {

/// Seeded stream whose draws are identical on every platform. The standard
/// distributions are implementation-defined, so uniform and normal are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  /// [0, 1) with 53 bits
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean = 0.0, double sd = 1.0) {
    if (spare_) {
      spare_ = false;
      return mean + sd * cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * std::numbers::pi * u2);
    spare_ = true;
    return mean + sd * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t next() { return gen_(); }

  /// Independent child stream, e.g. one per node.
  Rng split(std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(gen_()), static_cast<std::uint32_t>(salt),
                      static_cast<std::uint32_t>(salt >> 32)};
    std::mt19937_64 g(seq);
    Rng r;
    r.gen_ = g;
    return r;
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool spare_ = false;
};

}  // namespace zen
