#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "decompound/mixture.hpp"

namespace decompound {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // error estimate reported by the rule
};

struct QuadratureError : std::runtime_error {
  QuadratureError(double achieved, double requested)
      : std::runtime_error("quadrature did not reach the requested tolerance"
                           " (achieved " + std::to_string(achieved) +
                           ", requested " + std::to_string(requested) + ")"),
        achieved_tolerance(achieved),
        requested_tolerance(requested) {}
  double achieved_tolerance;
  double requested_tolerance;
};

inline constexpr double kDefaultQuadratureTolerance = 1e-10;

/// Adaptive Gauss-Kronrod (G7, K15) integration over [lo, hi]. The
/// integrands here are smooth and rapidly decaying, so panel subdivision
/// converges fast; if the estimated error still exceeds abs_tol a
/// QuadratureError carrying the achieved tolerance is thrown.
template <class F>
QuadratureResult integrate(F&& f, double lo, double hi,
                           double abs_tol = kDefaultQuadratureTolerance,
                           unsigned max_depth = 15) {
  if (!(lo < hi)) {
    throw std::invalid_argument("integrate: empty interval");
  }
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::
      integrate(std::forward<F>(f), lo, hi, max_depth, 1e-14, &error);
  if (!(error <= std::max(abs_tol, 1e-8 * std::fabs(value)))) {
    throw QuadratureError(error, abs_tol);
  }
  return {value, error};
}

/// Integration window covering all means of both mixtures plus n_sd shared
/// standard deviations; mixture tails beyond it are negligible at the
/// tolerances used in this library.
inline std::pair<double, double> density_window(const MixtureDensity& f,
                                                const MixtureDensity& g,
                                                double n_sd = 10.0) {
  double lo = f.means.front();
  double hi = f.means.front();
  for (const double m : f.means) {
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  for (const double m : g.means) {
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  const double spread =
      n_sd / std::sqrt(std::min(f.precision, g.precision));
  return {lo - spread, hi + spread};
}

}  // namespace decompound
