#ifndef MLELAB_RANDOM_HPP
#define MLELAB_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace mlelab {

/// SplitMix64 finalizer; used to derive well-separated child seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Child seed for stream `index` derived from `seed`.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 1));
}

/// Seeded random stream. All variates are generated from raw mt19937_64
/// output with fully specified arithmetic, so sequences are bit-identical
/// across platforms. Streams are never shared; derive independent child
/// streams with split().
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), eng_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream; deterministic in (seed, index).
  RandomStream split(std::uint64_t index) const {
    return RandomStream(split_seed(seed_, index));
  }

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (one variate per call).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 boosted through
  /// Gamma(shape + 1) * U^(1/shape).
  double gamma(double shape) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Poisson(mu). Sequential-search inversion for mu <= 30, transformed
  /// rejection (Hormann's PTRS, exact) above.
  double poisson(double mu) {
    if (mu <= 0.0) return 0.0;
    if (mu <= 30.0) {
      double p = std::exp(-mu);
      double cum = p;
      double k = 0.0;
      const double u = uniform();
      while (u > cum) {
        k += 1.0;
        p *= mu / k;
        cum += p;
        if (k > 30.0 + 200.0 * std::sqrt(mu) + 100.0) break;  // round-off guard
      }
      return k;
    }
    const double slam = std::sqrt(mu);
    const double loglam = std::log(mu);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mu + 0.43);
      if (us >= 0.07 && v <= vr) return k;
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
          k * loglam - mu - std::lgamma(k + 1.0)) {
        return k;
      }
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace mlelab

#endif  // MLELAB_RANDOM_HPP
