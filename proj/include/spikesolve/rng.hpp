#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "spikesolve/common.hpp"

namespace spikesolve {

// ---------------------------------------------------------------------------
// Deterministic, splittable RNG: SplitMix64 streams. Substream s of seed k is
// a SplitMix64 whose initial state is mix(k) ^ mix(s + C); replicates and
// independent draws (ground truth vs noise) use distinct substreams, so they
// parallelize without coordination and reproduce bit-identically.
// ---------------------------------------------------------------------------

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(detail::mix64(seed) ^ detail::mix64(stream + 0x632BE59BD9B4E019ULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe under log().
  double uniform01_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller, caching the second deviate.
  double gaussian() {
    if (have_cache_) {
      have_cache_ = false;
      return cache_;
    }
    const double u1 = uniform01_pos();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    cache_ = r * std::sin(th);
    have_cache_ = true;
    return r * std::cos(th);
  }

  // Poisson sampling, exact across the full rate range: inversion by
  // sequential search below 30, Hormann's PTRD transformed rejection above.
  std::uint64_t poisson(double rate) {
    if (rate < 0.0) throw NonPositiveInput("poisson: rate must be >= 0");
    if (rate == 0.0) return 0;
    if (rate < 30.0) return poisson_inversion(rate);
    return poisson_ptrd(rate);
  }

 private:
  std::uint64_t poisson_inversion(double rate) {
    const double limit = std::exp(-rate);
    std::uint64_t k = 0;
    double p = uniform01_pos();
    while (p > limit) {
      ++k;
      p *= uniform01_pos();
    }
    return k;
  }

  std::uint64_t poisson_ptrd(double mu) {
    const double smu = std::sqrt(mu);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mu = std::log(mu);
    for (;;) {
      double u, v = uniform01_pos();
      if (v <= 0.86 * vr) {
        u = v / vr - 0.43;
        return static_cast<std::uint64_t>(
            std::floor((2.0 * a / (0.5 - std::abs(u)) + b) * u + mu + 0.445));
      }
      if (v >= vr) {
        u = uniform01() - 0.5;
      } else {
        u = v / vr - 0.93;
        u = (u < 0.0 ? -0.5 : 0.5) - u;
        v = uniform01_pos() * vr;
      }
      const double us = 0.5 - std::abs(u);
      if (us < 0.013 && v > us) continue;
      const double kf = std::floor((2.0 * a / us + b) * u + mu + 0.445);
      if (kf < 0.0) continue;
      v = v * inv_alpha / (a / (us * us) + b);
      if (std::log(v) <= kf * log_mu - mu - std::lgamma(kf + 1.0))
        return static_cast<std::uint64_t>(kf);
    }
  }

  std::uint64_t state_;
  bool have_cache_ = false;
  double cache_ = 0.0;
};

}  // namespace spikesolve
