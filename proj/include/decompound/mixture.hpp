#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace decompound {

inline constexpr double kWeightSumTolerance = 1e-12;

/// log of the normal density with the given mean and variance. All Gaussian
/// evaluations in this library go through log space; ratios of densities are
/// formed by exponentiating differences, which keeps the sampler safe from
/// underflow when precisions are large.
inline double normal_log_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) +
                 d * d / variance);
}

inline double normal_pdf(double x, double mean, double variance) {
  return std::exp(normal_log_pdf(x, mean, variance));
}

/// Location mixture of J normals with a shared precision: the jump density
/// sum_j weights[j] * N(means[j], 1/precision).
struct MixtureDensity {
  std::vector<double> weights;
  std::vector<double> means;
  double precision = 1.0;

  std::size_t component_count() const { return weights.size(); }

  void validate() const {
    if (weights.empty() || weights.size() != means.size()) {
      throw std::invalid_argument(
          "MixtureDensity: weights and means must be nonempty and match");
    }
    if (!(precision > 0.0)) {
      throw std::invalid_argument("MixtureDensity: precision must be positive");
    }
    double sum = 0.0;
    for (const double w : weights) {
      if (!(w >= 0.0)) {
        throw std::invalid_argument("MixtureDensity: negative weight");
      }
      sum += w;
    }
    if (std::fabs(sum - 1.0) > kWeightSumTolerance) {
      throw std::invalid_argument("MixtureDensity: weights must sum to 1");
    }
  }

  /// E[Y] = sum_j rho_j mu_j.
  double mean() const {
    double m = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      m += weights[j] * means[j];
    }
    return m;
  }

  /// E[Y^2] = sum_j rho_j (mu_j^2 + 1/tau).
  double second_moment() const {
    double m2 = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      m2 += weights[j] * (means[j] * means[j] + 1.0 / precision);
    }
    return m2;
  }
};

inline double mixture_pdf(const MixtureDensity& f, double x) {
  const double variance = 1.0 / f.precision;
  double value = 0.0;
  for (std::size_t j = 0; j < f.weights.size(); ++j) {
    if (f.weights[j] > 0.0) {
      value += f.weights[j] * normal_pdf(x, f.means[j], variance);
    }
  }
  return value;
}

/// Number of multinomial terms in the k-fold convolution expansion,
/// C(k+J-1, J-1), saturating instead of overflowing.
inline std::uint64_t convolution_term_count(std::uint64_t k, std::size_t j) {
  std::uint64_t count = 1;
  for (std::uint64_t i = 1; i < j; ++i) {
    const double projected =
        static_cast<double>(count) * static_cast<double>(k + i) /
        static_cast<double>(i);
    if (projected > 1e18) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    count = count * (k + i) / i;  // exact: product of i consecutives / i!
  }
  return count;
}

inline constexpr std::uint64_t kDefaultConvolutionTermCap = 1000000;

/// k-fold self-convolution of the mixture, evaluated by expanding over all
/// type-count vectors (m_1,...,m_J) with sum k: each term contributes a
/// multinomial weight times N(sum_j m_j mu_j, k/tau). For J=2 this reduces
/// to the binomial expansion over (l, k-l).
///
/// Throws if the expansion would exceed term_cap terms; the cost is
/// C(k+J-1, J-1) and grows quickly with J.
inline double convolution_pdf(const MixtureDensity& f, std::uint64_t k,
                              double x,
                              std::uint64_t term_cap = kDefaultConvolutionTermCap) {
  if (k == 0) {
    throw std::invalid_argument("convolution_pdf: k must be >= 1");
  }
  const std::size_t j_count = f.component_count();
  if (convolution_term_count(k, j_count) > term_cap) {
    throw std::invalid_argument(
        "convolution_pdf: multinomial expansion exceeds the term cap");
  }
  if (k == 1) {
    return mixture_pdf(f, x);
  }
  std::vector<double> log_weights(j_count);
  for (std::size_t j = 0; j < j_count; ++j) {
    log_weights[j] = f.weights[j] > 0.0
                         ? std::log(f.weights[j])
                         : -std::numeric_limits<double>::infinity();
  }
  const double variance = static_cast<double>(k) / f.precision;
  const double log_k_factorial = std::lgamma(static_cast<double>(k) + 1.0);

  // Enumerate compositions of k into J parts in lexicographic order,
  // starting from (k, 0, ..., 0).
  std::vector<std::uint64_t> counts(j_count, 0);
  counts[0] = k;
  double value = 0.0;
  for (;;) {
    double log_w = log_k_factorial;
    double mean = 0.0;
    bool zero_term = false;
    for (std::size_t j = 0; j < j_count; ++j) {
      const auto m = counts[j];
      if (m > 0 && f.weights[j] == 0.0) {
        zero_term = true;
        break;
      }
      log_w += static_cast<double>(m) * log_weights[j] -
               std::lgamma(static_cast<double>(m) + 1.0);
      mean += static_cast<double>(m) * f.means[j];
    }
    if (!zero_term) {
      value += std::exp(log_w + normal_log_pdf(x, mean, variance));
    }
    if (j_count == 1 || counts[j_count - 1] == k) {
      break;
    }
    // next composition: decrement the rightmost positive entry before the
    // last position, move everything to its right (plus one) just after it
    std::size_t p = j_count - 2;
    while (counts[p] == 0) {
      --p;
    }
    std::uint64_t tail = counts[j_count - 1] + 1;
    counts[j_count - 1] = 0;
    --counts[p];
    counts[p + 1] = tail;
    for (std::size_t j = p + 2; j < j_count; ++j) {
      counts[j] = 0;
    }
  }
  return value;
}

/// Sampler parameter state theta = (psi, mu, tau): per-type jump intensities,
/// component means, shared precision. The jump density and overall intensity
/// are derived through psi_j = lambda * rho_j.
struct ModelParams {
  std::vector<double> psi;
  std::vector<double> means;
  double precision = 1.0;

  std::size_t component_count() const { return psi.size(); }

  double intensity() const {
    double lambda = 0.0;
    for (const double p : psi) {
      lambda += p;
    }
    return lambda;
  }

  void validate() const {
    if (psi.empty() || psi.size() != means.size()) {
      throw std::invalid_argument(
          "ModelParams: psi and means must be nonempty and match");
    }
    for (const double p : psi) {
      if (!(p > 0.0)) {
        throw std::invalid_argument("ModelParams: psi entries must be positive");
      }
    }
    if (!(precision > 0.0)) {
      throw std::invalid_argument("ModelParams: precision must be positive");
    }
  }

  MixtureDensity jump_density() const {
    const double lambda = intensity();
    MixtureDensity f;
    f.weights.resize(psi.size());
    for (std::size_t j = 0; j < psi.size(); ++j) {
      f.weights[j] = psi[j] / lambda;
    }
    f.means = means;
    f.precision = precision;
    return f;
  }
};

struct Reparametrisation {
  double intensity = 0.0;           // lambda = sum_j psi_j
  std::vector<double> weights;      // rho_j = psi_j / lambda
};

inline Reparametrisation reparametrise(std::span<const double> psi) {
  if (psi.empty()) {
    throw std::invalid_argument("reparametrise: psi must be nonempty");
  }
  Reparametrisation r;
  for (const double p : psi) {
    if (!(p > 0.0)) {
      throw std::invalid_argument("reparametrise: psi entries must be positive");
    }
    r.intensity += p;
  }
  r.weights.resize(psi.size());
  for (std::size_t j = 0; j < psi.size(); ++j) {
    r.weights[j] = psi[j] / r.intensity;
  }
  return r;
}

}  // namespace decompound
