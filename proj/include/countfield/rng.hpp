#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace countfield {

// Seeded RNG with samplers written out explicitly so that streams are
// reproducible across standard libraries and platforms (std::mt19937_64 is
// fully specified by the standard; the std:: distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Derive an independent sub-stream, e.g. one per CV split or bench replicate.
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed ^ (0x9e3779b97f4a7c15ULL + stream)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // rejection-free modulo is fine here; n is tiny relative to 2^64
    return engine_() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (no cached second value).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Binomial(n, p) by n independent Bernoulli trials: each event is routed
  /// individually, which is exactly the thinning semantics we need.
  std::int64_t binomial(std::int64_t n, double p) {
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }

  /// Poisson(mean). Knuth's product method for small means, Hormann's PTRS
  /// transformed rejection for large ones.
  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 10.0) return poisson_knuth(mean);
    return poisson_ptrs(mean);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::int64_t poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    double prod = uniform();
    std::int64_t k = 0;
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::int64_t poisson_ptrs(double mean) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          k * loglam - mean - std::lgamma(k + 1.0)) {
        return static_cast<std::int64_t>(k);
      }
    }
  }

  std::mt19937_64 engine_;
};

}  // namespace countfield
