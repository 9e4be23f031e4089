#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "decompound/mixture.hpp"
#include "decompound/observations.hpp"
#include "decompound/rng.hpp"

namespace decompound {

// Domain-separation tags for RngStream::substream keys. Each simulation and
// sampling context hashes (seed, tag-or-iteration, index), so results do not
// depend on traversal or scheduling order.
inline constexpr std::uint64_t kPathStreamTag = 0x7061746800000000ULL;
inline constexpr std::uint64_t kIncrementStreamTag = 0x696e637200000000ULL;

/// One realized compound Poisson path on [0, horizon]: strictly increasing
/// jump times with matching jump sizes.
struct CppPath {
  double horizon = 0.0;
  std::vector<double> jump_times;
  std::vector<double> jump_sizes;

  void validate() const {
    if (!(horizon > 0.0)) {
      throw std::invalid_argument("CppPath: horizon must be positive");
    }
    if (jump_times.size() != jump_sizes.size()) {
      throw std::invalid_argument("CppPath: times and sizes must match");
    }
    for (std::size_t i = 0; i < jump_times.size(); ++i) {
      if (!(jump_times[i] > 0.0) || jump_times[i] > horizon ||
          (i > 0 && !(jump_times[i] > jump_times[i - 1]))) {
        throw std::invalid_argument(
            "CppPath: jump times must be strictly increasing in (0, horizon]");
      }
    }
  }

  /// X_t = sum of jump sizes up to and including t.
  double value_at(double t) const {
    double x = 0.0;
    for (std::size_t i = 0; i < jump_times.size() && jump_times[i] <= t; ++i) {
      x += jump_sizes[i];
    }
    return x;
  }
};

/// Draw a path: jump count Poisson(lambda * horizon), jump times iid uniform
/// on (0, horizon] sorted, jump sizes iid from the mixture.
inline CppPath simulate_path(double intensity, const MixtureDensity& f,
                             double horizon, std::uint64_t seed) {
  if (!(intensity > 0.0) || !(horizon > 0.0)) {
    throw std::invalid_argument(
        "simulate_path: intensity and horizon must be positive");
  }
  f.validate();
  RngStream rng = RngStream::substream(seed, kPathStreamTag, 0);
  const std::uint64_t count = rng.poisson(intensity * horizon);
  CppPath path;
  path.horizon = horizon;
  path.jump_times.resize(count);
  for (auto& t : path.jump_times) {
    t = horizon * rng.uniform();
  }
  std::sort(path.jump_times.begin(), path.jump_times.end());
  path.jump_sizes.resize(count);
  const double sd = 1.0 / std::sqrt(f.precision);
  for (auto& y : path.jump_sizes) {
    const std::size_t j = rng.categorical(f.weights);
    y = f.means[j] + sd * rng.normal();
  }
  return path;
}

/// Increments of the path over a strictly increasing grid 0 < t_1 < ... <=
/// horizon. Segments without jumps produce increments that are exactly zero
/// (differences of identical prefix sums), so the nonzero index set needs no
/// threshold on simulated data.
inline ObservationSet discretize(const CppPath& path,
                                 std::span<const double> grid) {
  path.validate();
  if (grid.empty()) {
    throw std::invalid_argument("discretize: empty grid");
  }
  double prev = 0.0;
  for (const double t : grid) {
    if (!(t > prev) || t > path.horizon) {
      throw std::invalid_argument(
          "discretize: grid must be strictly increasing within (0, horizon]");
    }
    prev = t;
  }
  // prefix sums of jump sizes; increment = difference of prefix values
  std::vector<double> prefix(path.jump_sizes.size() + 1, 0.0);
  for (std::size_t i = 0; i < path.jump_sizes.size(); ++i) {
    prefix[i + 1] = prefix[i] + path.jump_sizes[i];
  }
  std::vector<double> durations(grid.size());
  std::vector<double> increments(grid.size());
  prev = 0.0;
  std::size_t jump = 0;
  double prefix_prev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    while (jump < path.jump_times.size() && path.jump_times[jump] <= grid[i]) {
      ++jump;
    }
    durations[i] = grid[i] - prev;
    increments[i] = prefix[jump] - prefix_prev;
    prefix_prev = prefix[jump];
    prev = grid[i];
  }
  return ObservationSet::from_increments(std::move(durations),
                                         std::move(increments));
}

/// Simulate increments directly from the hierarchical form: per-type counts
/// n_ij ~ Poisson(psi_j Delta_i), then z_i | a_i ~ N(a_i' mu, n_i / tau).
/// Returns the observations together with the true latent counts, the
/// ground truth used by sampler tests and reference summaries.
///
/// Each segment draws from its own substream keyed by (seed, tag, i), so the
/// result is independent of evaluation order.
inline std::pair<ObservationSet, AuxiliaryState> simulate_increments(
    const ModelParams& params, std::span<const double> durations,
    std::uint64_t seed) {
  params.validate();
  if (durations.empty()) {
    throw std::invalid_argument("simulate_increments: no durations");
  }
  const std::size_t j_count = params.component_count();
  const std::size_t n = durations.size();
  std::vector<double> increments(n, 0.0);
  std::vector<std::vector<std::uint32_t>> counts(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(durations[i] > 0.0)) {
      throw std::invalid_argument(
          "simulate_increments: durations must be positive");
    }
    RngStream rng = RngStream::substream(seed, kIncrementStreamTag, i);
    counts[i].resize(j_count);
    std::uint64_t total = 0;
    double mean = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
      const std::uint64_t c = rng.poisson(params.psi[j] * durations[i]);
      counts[i][j] = static_cast<std::uint32_t>(c);
      total += c;
      mean += static_cast<double>(c) * params.means[j];
    }
    if (total > 0) {
      increments[i] =
          mean + rng.normal() * std::sqrt(static_cast<double>(total) /
                                          params.precision);
    }
  }
  ObservationSet obs = ObservationSet::from_increments(
      std::vector<double>(durations.begin(), durations.end()),
      std::move(increments));
  AuxiliaryState aux(obs.nonzero_count(), j_count);
  for (std::size_t k = 0; k < obs.nonzero.size(); ++k) {
    const auto& src = counts[obs.nonzero[k]];
    auto dst = aux.row(k);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return {std::move(obs), std::move(aux)};
}

}  // namespace decompound
