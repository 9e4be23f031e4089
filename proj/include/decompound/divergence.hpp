#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "decompound/increment_law.hpp"
#include "decompound/mixture.hpp"
#include "decompound/quadrature.hpp"

namespace decompound {

enum class DivergenceKind { HellingerSq, KL, V };

inline const char* to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::HellingerSq: return "hellinger_sq";
    case DivergenceKind::KL: return "kl";
    case DivergenceKind::V: return "v";
  }
  throw std::invalid_argument("unknown divergence kind");
}

/// Scalar discrepancy K(x, y) = x log(x/y) - x + y for x, y > 0;
/// nonnegative, zero iff x == y.
inline double scalar_kl(double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) {
    throw std::invalid_argument("scalar_kl: arguments must be positive");
  }
  return x * std::log(x / y) - x + y;
}

// Below this, a density value is treated as exactly zero inside the V and KL
// integrands (x log^2(x/...) -> 0 as x -> 0).
inline constexpr double kDensityFloor = 1e-300;

/// Pointwise integrand of the unnormalized divergences between nonnegative
/// integrable functions: h2 = (sqrt f - sqrt g)^2, K = f log(f/g) - f + g,
/// V = f log^2(f/g). For K and V, g must be positive wherever f is.
inline double divergence_integrand(DivergenceKind kind, double fx, double gx) {
  switch (kind) {
    case DivergenceKind::HellingerSq: {
      const double d = std::sqrt(fx) - std::sqrt(gx);
      return d * d;
    }
    case DivergenceKind::KL: {
      if (fx < kDensityFloor) {
        return gx;  // limit of x log(x/y) - x + y as x -> 0
      }
      return fx * std::log(fx / gx) - fx + gx;
    }
    case DivergenceKind::V: {
      if (fx < kDensityFloor) {
        return 0.0;
      }
      const double l = std::log(fx / gx);
      return fx * l * l;
    }
  }
  throw std::invalid_argument("unknown divergence kind");
}

struct DivergenceResult {
  double value = 0.0;
  double quad_error = 0.0;
};

/// Divergence between two nonnegative integrable functions (not necessarily
/// densities) by adaptive quadrature over [lo, hi].
template <class F, class G>
DivergenceResult density_divergence(DivergenceKind kind, F&& f, G&& g,
                                    double lo, double hi,
                                    double abs_tol = kDefaultQuadratureTolerance) {
  auto integrand = [&](double x) {
    return divergence_integrand(kind, f(x), g(x));
  };
  const QuadratureResult q = integrate(integrand, lo, hi, abs_tol);
  return {std::max(0.0, q.value), q.error};
}

/// Divergence between two increment laws sharing the same segment duration:
/// the exact atom contribution plus quadrature over the continuous parts.
/// Dividing the result by the duration gives the Delta-scaled quantity
/// (h^Delta squared, K^Delta, V^Delta).
inline DivergenceResult increment_divergence(
    DivergenceKind kind, const IncrementLaw& law0, const IncrementLaw& law1,
    double abs_tol = kDefaultQuadratureTolerance) {
  if (law0.duration() != law1.duration()) {
    throw std::invalid_argument(
        "increment_divergence: laws must share the same duration");
  }
  const double atom_term =
      divergence_integrand(kind, law0.atom(), law1.atom());
  const auto [lo0, hi0] = law0.support_window();
  const auto [lo1, hi1] = law1.support_window();
  auto f = [&](double z) { return law0.continuous_pdf(z); };
  auto g = [&](double z) { return law1.continuous_pdf(z); };
  const DivergenceResult cont = density_divergence(
      kind, f, g, std::min(lo0, lo1), std::max(hi0, hi1), abs_tol);
  return {atom_term + cont.value, cont.quad_error};
}

/// Small-duration limits of the scaled divergences between increment laws:
/// the same divergences evaluated on the intensity-weighted jump densities
/// lambda*f and lambda0*f0.
inline DivergenceResult limit_divergence(
    DivergenceKind kind, double lambda, const MixtureDensity& f,
    double lambda0, const MixtureDensity& f0,
    double abs_tol = kDefaultQuadratureTolerance) {
  if (!(lambda > 0.0) || !(lambda0 > 0.0)) {
    throw std::invalid_argument(
        "limit_divergence: intensities must be positive");
  }
  f.validate();
  f0.validate();
  const auto [lo, hi] = density_window(f, f0);
  auto lf = [&](double x) { return lambda * mixture_pdf(f, x); };
  auto lf0 = [&](double x) { return lambda0 * mixture_pdf(f0, x); };
  return density_divergence(kind, lf, lf0, lo, hi, abs_tol);
}

}  // namespace decompound
