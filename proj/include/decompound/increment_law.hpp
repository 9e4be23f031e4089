#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "decompound/mixture.hpp"

namespace decompound {

inline constexpr double kDefaultTailTolerance = 1e-12;

/// Law of one increment Z over a segment of length Delta: a point mass
/// exp(-lambda*Delta) at zero plus an absolutely continuous part that is an
/// infinite Poisson-weighted sum of jump-density self-convolutions. The sum
/// is truncated at max_terms, chosen so that the Poisson(lambda*Delta) tail
/// mass beyond it stays below tail_tolerance.
class IncrementLaw {
 public:
  IncrementLaw(ModelParams params, double duration,
               double tail_tolerance = kDefaultTailTolerance)
      : params_(std::move(params)),
        duration_(duration),
        tail_tolerance_(tail_tolerance) {
    params_.validate();
    if (!(duration_ > 0.0)) {
      throw std::invalid_argument("IncrementLaw: duration must be positive");
    }
    if (!(tail_tolerance_ > 0.0)) {
      throw std::invalid_argument(
          "IncrementLaw: tail tolerance must be positive");
    }
    jump_density_ = params_.jump_density();
    const double rate = params_.intensity() * duration_;
    atom_ = std::exp(-rate);
    // Poisson weights p_m = e^{-rate} rate^m / m!, accumulated until the
    // tail beyond m drops below tolerance.
    double p = atom_;
    double cdf = atom_;
    while (1.0 - cdf > tail_tolerance_) {
      const double m = static_cast<double>(poisson_weights_.size()) + 1.0;
      p *= rate / m;
      cdf += p;
      poisson_weights_.push_back(p);
      if (poisson_weights_.size() > 100000) {
        throw std::invalid_argument(
            "IncrementLaw: series truncation tolerance unattainable");
      }
    }
    if (poisson_weights_.empty()) {
      poisson_weights_.push_back(p * rate);  // keep at least the m=1 term
    }
    truncation_tail_ = std::max(0.0, 1.0 - cdf);
  }

  const ModelParams& params() const { return params_; }
  const MixtureDensity& jump_density() const { return jump_density_; }
  double duration() const { return duration_; }
  double atom() const { return atom_; }
  std::size_t max_terms() const { return poisson_weights_.size(); }
  double truncation_tail() const { return truncation_tail_; }
  double tail_tolerance() const { return tail_tolerance_; }

  /// Series weight a_m(lambda*Delta) = (lambda*Delta)^m / (m! (e^{lD}-1)),
  /// m = 1..max_terms. These multiply (1 - atom) in the density.
  double series_weight(std::size_t m) const {
    if (m < 1 || m > poisson_weights_.size()) {
      throw std::out_of_range("IncrementLaw: series weight index");
    }
    return poisson_weights_[m - 1] / (1.0 - atom_);
  }

  /// Continuous part of the density at z (valid for z != 0):
  /// (1 - e^{-lD}) sum_m a_m f^{*m}(z) = sum_m Poisson_m(lD) f^{*m}(z).
  double continuous_pdf(double z) const {
    double value = 0.0;
    for (std::size_t m = 1; m <= poisson_weights_.size(); ++m) {
      value += poisson_weights_[m - 1] *
               convolution_pdf(jump_density_, m, z, kConvolutionCap);
    }
    return value;
  }

  /// Bound on the pointwise error of continuous_pdf from series truncation:
  /// tail mass times sup_x f^{*m}(x) <= sqrt(tau / (2 pi)).
  double truncation_error_bound() const {
    return truncation_tail_ *
           std::sqrt(params_.precision / (2.0 * std::numbers::pi));
  }

  /// Window [lo, hi] outside of which the continuous part is negligible:
  /// covers every m-fold convolution mean, m <= max_terms, plus n_sd
  /// convolution standard deviations.
  std::pair<double, double> support_window(double n_sd = 10.0) const {
    double lo_mean = 0.0;
    double hi_mean = 0.0;
    for (const double mu : params_.means) {
      lo_mean = std::min(lo_mean, mu);
      hi_mean = std::max(hi_mean, mu);
    }
    const double m = static_cast<double>(poisson_weights_.size());
    const double spread = n_sd * std::sqrt(m / params_.precision);
    return {m * lo_mean - spread, m * hi_mean + spread};
  }

 private:
  // increment_pdf sums convolutions up to max_terms; the guard only matters
  // for large J, where the enumeration cost must stay bounded.
  static constexpr std::uint64_t kConvolutionCap = 10000000;

  ModelParams params_;
  MixtureDensity jump_density_;
  double duration_;
  double tail_tolerance_;
  double atom_;
  double truncation_tail_;
  std::vector<double> poisson_weights_;  // m = 1, 2, ...
};

/// Density of the increment law with respect to Lebesgue + point mass at 0:
/// the atom weight at z == 0, the truncated continuous part elsewhere.
inline double increment_pdf(const IncrementLaw& law, double z) {
  if (z == 0.0) {
    return law.atom();
  }
  return law.continuous_pdf(z);
}

/// Log-likelihood of a continuously observed path on [0, T]:
/// |V| log(lambda) - lambda T + sum_i log f(J_i). Used by test oracles, not
/// by the sampler. Returns -infinity if some jump lands where the jump
/// density evaluates to zero in double precision.
inline double log_continuous_likelihood(
    const ModelParams& params, std::span<const double> jump_times,
    std::span<const double> jump_sizes, double horizon) {
  params.validate();
  if (jump_times.size() != jump_sizes.size()) {
    throw std::invalid_argument(
        "log_continuous_likelihood: times and sizes must match");
  }
  if (!(horizon > 0.0)) {
    throw std::invalid_argument(
        "log_continuous_likelihood: horizon must be positive");
  }
  for (const double t : jump_times) {
    if (!(t >= 0.0) || t > horizon) {
      throw std::invalid_argument(
          "log_continuous_likelihood: jump time outside [0, T]");
    }
  }
  const double lambda = params.intensity();
  const MixtureDensity f = params.jump_density();
  double value = static_cast<double>(jump_times.size()) * std::log(lambda) -
                 lambda * horizon;
  for (const double y : jump_sizes) {
    const double density = mixture_pdf(f, y);
    if (density <= 0.0) {
      return -std::numeric_limits<double>::infinity();
    }
    value += std::log(density);
  }
  return value;
}

}  // namespace decompound
