#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace decompound {

/// Counter-mixed splitmix64 stream.
///
/// Every consumer of randomness in this library draws from an RngStream.
/// Streams are cheap value types: a stream is fully determined by the
/// 64-bit state it was constructed with, and independent substreams are
/// derived by hashing a (seed, key1, key2) triple. Substreams keyed by
/// distinct triples are statistically independent, which is what makes
/// per-segment updates reproducible regardless of traversal order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ kGolden)) {}

  /// Derive the substream identified by (seed, key1, key2).
  static RngStream substream(std::uint64_t seed, std::uint64_t key1,
                             std::uint64_t key2) {
    std::uint64_t s = mix(seed ^ kGolden);
    s = mix(s ^ (key1 + kGolden));
    s = mix(s ^ (key2 + 2 * kGolden));
    return RngStream(s, from_state{});
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += kGolden);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0,1); never returns an exact endpoint,
  /// so log(uniform()) is always finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential() { return -std::log(uniform()); }

  /// Standard normal via Box-Muller. Consumes exactly two uniforms.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Gamma(shape, rate) by the Marsaglia-Tsang squeeze method, with the
  /// usual u^(1/shape) boost for shape < 1.
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0)) {
      throw std::invalid_argument("gamma: shape and rate must be positive");
    }
    if (shape < 1.0) {
      const double boost = std::pow(uniform(), 1.0 / shape);
      return gamma(shape + 1.0, rate) * boost;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) {
        return d * v / rate;
      }
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
        return d * v / rate;
      }
    }
  }

  /// Poisson(mean): cdf inversion below mean 10, Hormann's transformed
  /// rejection (PTRS) above. Both regimes occur here: per-segment rates
  /// lambda*Delta are order one, path-level counts have mean lambda*T.
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0)) {
      throw std::invalid_argument("poisson: mean must be nonnegative");
    }
    if (mean == 0.0) {
      return 0;
    }
    if (mean < 10.0) {
      const double u = uniform();
      std::uint64_t k = 0;
      double p = std::exp(-mean);
      double cdf = p;
      while (u > cdf) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
        if (k > 10000) {
          break;  // u in the far tail; cdf has saturated in double precision
        }
      }
      return k;
    }
    // PTRS, Hormann (1993). Acceptance rate >= 0.75 for mean >= 10.
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
      double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (kf < 0.0) {
        continue;
      }
      if (us >= 0.07 && v <= v_r) {
        return static_cast<std::uint64_t>(kf);
      }
      if (us < 0.013 && v > us) {
        continue;
      }
      const double s = std::log(v * inv_alpha / (a / (us * us) + b));
      const double t = -mean + kf * log_mean - std::lgamma(kf + 1.0);
      if (s <= t) {
        return static_cast<std::uint64_t>(kf);
      }
    }
  }

  /// Poisson(mean) conditioned to be >= 1, by inversion on the truncated
  /// cdf; no rejection loop even for tiny means. For large means the
  /// zero event is negligible and a plain Poisson draw is retried instead.
  std::uint64_t zero_truncated_poisson(double mean) {
    if (!(mean > 0.0)) {
      throw std::invalid_argument(
          "zero_truncated_poisson: mean must be positive");
    }
    if (mean > 30.0) {
      for (;;) {
        const std::uint64_t k = poisson(mean);
        if (k >= 1) {
          return k;
        }
      }
    }
    const double p0 = std::exp(-mean);
    const double target = p0 + uniform() * (1.0 - p0);
    std::uint64_t k = 1;
    double p = p0 * mean;
    double cdf = p0 + p;
    while (cdf < target) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (k > 10000) {
        break;
      }
    }
    return k;
  }

  /// Index j with probability probs[j] / sum(probs).
  std::size_t categorical(std::span<const double> probs) {
    double total = 0.0;
    for (const double p : probs) {
      if (!(p >= 0.0)) {
        throw std::invalid_argument("categorical: negative probability");
      }
      total += p;
    }
    if (!(total > 0.0)) {
      throw std::invalid_argument("categorical: no positive probability");
    }
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < probs.size(); ++j) {
      acc += probs[j];
      if (u < acc) {
        return j;
      }
    }
    return probs.size() - 1;
  }

  /// Multinomial(n; probs) by n categorical draws, accumulated into out.
  /// Totals here are per-segment jump counts, so n is small and the
  /// per-trial method is both exact and fast enough.
  void multinomial(std::uint64_t n, std::span<const double> probs,
                   std::span<std::uint32_t> out) {
    if (out.size() != probs.size()) {
      throw std::invalid_argument("multinomial: output size mismatch");
    }
    for (auto& c : out) {
      c = 0;
    }
    for (std::uint64_t trial = 0; trial < n; ++trial) {
      ++out[categorical(probs)];
    }
  }

 private:
  struct from_state {};
  RngStream(std::uint64_t raw, from_state) : state_(raw) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  std::uint64_t state_;
};

}  // namespace decompound
