#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "decompound/divergence.hpp"
#include "decompound/mixture.hpp"
#include "decompound/rng.hpp"
#include "decompound/sampler.hpp"
#include "decompound/simulate.hpp"

namespace decompound {

/// Sample autocorrelation at lags 0..max_lag (biased estimator, lag 0 is 1).
inline std::vector<double> autocorrelation(std::span<const double> series,
                                           std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= max_lag) {
    throw std::invalid_argument("autocorrelation: series shorter than lags");
  }
  double mean = 0.0;
  for (const double x : series) {
    mean += x;
  }
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (const double x : series) {
    c0 += (x - mean) * (x - mean);
  }
  if (c0 == 0.0) {
    throw std::invalid_argument("autocorrelation: constant series");
  }
  std::vector<double> acf(max_lag + 1);
  acf[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double ck = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) {
      ck += (series[t] - mean) * (series[t + k] - mean);
    }
    acf[k] = ck / c0;
  }
  return acf;
}

/// Effective sample size by Geyer's initial monotone sequence: sum paired
/// autocorrelations until the first nonpositive pair, enforce monotone
/// decay, ess = n / (2 * sum - 1), clamped to [1, n]. Constant series carry
/// no autocorrelation information and report full size.
inline double effective_sample_size(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) {
    return static_cast<double>(n);
  }
  double mean = 0.0;
  for (const double x : series) {
    mean += x;
  }
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (const double x : series) {
    c0 += (x - mean) * (x - mean);
  }
  if (c0 == 0.0) {
    return static_cast<double>(n);
  }
  auto rho = [&](std::size_t k) {
    double ck = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) {
      ck += (series[t] - mean) * (series[t + k] - mean);
    }
    return ck / c0;
  };
  double sum_pairs = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    double pair = rho(k) + rho(k + 1);
    if (pair <= 0.0) {
      break;
    }
    pair = std::min(pair, prev_pair);  // monotone initial sequence
    sum_pairs += pair;
    prev_pair = pair;
  }
  const double tau_int = std::max(1.0, 2.0 * sum_pairs - 1.0);
  return std::clamp(static_cast<double>(n) / tau_int, 1.0,
                    static_cast<double>(n));
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  double ess = 0.0;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;
  std::size_t retained = 0;
  std::optional<double> acceptance_rate;
};

namespace detail {

inline std::vector<const TraceRow*> retained_rows(const Trace& trace,
                                                  std::uint64_t burn_in,
                                                  std::uint64_t thin) {
  if (thin < 1) {
    throw std::invalid_argument("retained_rows: thin must be >= 1");
  }
  std::vector<const TraceRow*> kept;
  std::size_t index = 0;
  for (const TraceRow& row : trace.rows) {
    if (row.iteration > burn_in) {
      if (index % thin == 0) {
        kept.push_back(&row);
      }
      ++index;
    }
  }
  if (kept.empty()) {
    throw std::invalid_argument(
        "retained_rows: no iterates left after burn-in and thinning");
  }
  return kept;
}

inline double quantile(std::vector<double> sorted, double p) {
  // linear interpolation between order statistics (type 7)
  const std::size_t n = sorted.size();
  if (n == 1) {
    return sorted[0];
  }
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double w = h - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

inline ParameterSummary summarize_series(std::string name,
                                         std::vector<double> values) {
  ParameterSummary s;
  s.name = std::move(name);
  const double n = static_cast<double>(values.size());
  for (const double v : values) {
    s.mean += v;
  }
  s.mean /= n;
  double ss = 0.0;
  for (const double v : values) {
    ss += (v - s.mean) * (v - s.mean);
  }
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.ess = effective_sample_size(values);
  std::sort(values.begin(), values.end());
  s.q025 = quantile(values, 0.025);
  s.q50 = quantile(values, 0.5);
  s.q975 = quantile(values, 0.975);
  return s;
}

}  // namespace detail

/// Names of the trace columns in storage order:
/// psi_1..psi_J, mu_1..mu_J, tau, lambda.
inline std::vector<std::string> trace_column_names(std::size_t j_count) {
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= j_count; ++j) {
    names.push_back("psi_" + std::to_string(j));
  }
  for (std::size_t j = 1; j <= j_count; ++j) {
    names.push_back("mu_" + std::to_string(j));
  }
  names.push_back("tau");
  names.push_back("lambda");
  return names;
}

inline double trace_column_value(const TraceRow& row, std::size_t j_count,
                                 std::size_t column) {
  if (column < j_count) {
    return row.psi[column];
  }
  if (column < 2 * j_count) {
    return row.means[column - j_count];
  }
  return column == 2 * j_count ? row.precision : row.intensity;
}

/// Summaries over the retained iterates (iteration > burn_in, then every
/// thin-th row).
inline PosteriorSummary posterior_summary(
    const Trace& trace, std::uint64_t burn_in, std::uint64_t thin = 1,
    std::optional<double> acceptance_rate = std::nullopt) {
  const auto kept = detail::retained_rows(trace, burn_in, thin);
  const std::size_t j_count = trace.component_count;
  PosteriorSummary summary;
  summary.retained = kept.size();
  summary.acceptance_rate = acceptance_rate;
  const auto names = trace_column_names(j_count);
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::vector<double> values(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
      values[r] = trace_column_value(*kept[r], j_count, c);
    }
    summary.parameters.push_back(
        detail::summarize_series(names[c], std::move(values)));
  }
  return summary;
}

/// Parameters at the posterior mean of the retained iterates.
inline ModelParams posterior_mean_params(const Trace& trace,
                                         std::uint64_t burn_in,
                                         std::uint64_t thin = 1) {
  const auto kept = detail::retained_rows(trace, burn_in, thin);
  const std::size_t j_count = trace.component_count;
  ModelParams params;
  params.psi.assign(j_count, 0.0);
  params.means.assign(j_count, 0.0);
  params.precision = 0.0;
  for (const TraceRow* row : kept) {
    for (std::size_t j = 0; j < j_count; ++j) {
      params.psi[j] += row->psi[j];
      params.means[j] += row->means[j];
    }
    params.precision += row->precision;
  }
  const double n = static_cast<double>(kept.size());
  for (std::size_t j = 0; j < j_count; ++j) {
    params.psi[j] /= n;
    params.means[j] /= n;
  }
  params.precision /= n;
  return params;
}

/// Density curve on a grid. The default is the plug-in construction used by
/// the reference figures: the mixture evaluated at the posterior-mean
/// parameters, with weights renormalized from the psi means. Setting
/// predictive_average instead averages the per-iterate densities.
inline std::vector<double> posterior_mean_density(
    const Trace& trace, std::uint64_t burn_in, std::uint64_t thin,
    std::span<const double> grid, bool predictive_average = false) {
  std::vector<double> curve(grid.size(), 0.0);
  if (!predictive_average) {
    const ModelParams params = posterior_mean_params(trace, burn_in, thin);
    const MixtureDensity f = params.jump_density();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      curve[g] = mixture_pdf(f, grid[g]);
    }
    return curve;
  }
  const auto kept = detail::retained_rows(trace, burn_in, thin);
  for (const TraceRow* row : kept) {
    ModelParams params;
    params.psi = row->psi;
    params.means = row->means;
    params.precision = row->precision;
    const MixtureDensity f = params.jump_density();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      curve[g] += mixture_pdf(f, grid[g]);
    }
  }
  for (auto& v : curve) {
    v /= static_cast<double>(kept.size());
  }
  return curve;
}

/// Optional post-hoc relabeling: applies to every row the single component
/// permutation that best matches the posterior-mean locations to the given
/// reference, undoing a label switch relative to a known truth. Summaries of
/// label-symmetric quantities are unaffected.
inline Trace relabel_components(const Trace& trace,
                                std::span<const double> reference_means,
                                std::uint64_t burn_in = 0,
                                std::uint64_t thin = 1) {
  const std::size_t j_count = trace.component_count;
  if (reference_means.size() != j_count) {
    throw std::invalid_argument(
        "relabel_components: reference length must equal component count");
  }
  const ModelParams mean_params =
      posterior_mean_params(trace, burn_in, thin);
  std::vector<std::size_t> perm(j_count);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
      const double d = mean_params.means[perm[j]] - reference_means[j];
      cost += d * d;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  Trace out = trace;
  for (TraceRow& row : out.rows) {
    TraceRow src = row;
    for (std::size_t j = 0; j < j_count; ++j) {
      row.psi[j] = src.psi[best[j]];
      row.means[j] = src.means[best[j]];
    }
  }
  return out;
}

/// One cell of the contraction study: n segments of length delta, the
/// replication-averaged scaled Hellinger distance between the posterior-mean
/// parameters and the truth, and the average posterior mass outside the
/// ball of radius ball_constant / sqrt(n delta).
struct ContractionCell {
  std::size_t n = 0;
  double delta = 0.0;
  double n_delta = 0.0;
  double mean_distance = 0.0;
  double distance_variance = 0.0;
  double mass_outside = 0.0;
  std::size_t completed = 0;
};

struct ContractionReport {
  std::vector<ContractionCell> cells;
  bool slope_defined = false;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_stderr = std::numeric_limits<double>::quiet_NaN();
};

struct ContractionConfig {
  std::vector<std::pair<std::size_t, double>> grid;  // (n, delta), n*delta increasing
  std::size_t replications = 1;
  ModelParams truth;
  Hyperparameters hyper;
  RunOptions mcmc;
  double ball_constant = 2.0;
  std::uint64_t seed = 0;
  std::size_t mass_draw_cap = 200;  // posterior draws used for the ball mass
};

/// Scaled Hellinger distance proxy between parameter sets: the square root
/// of the small-duration Hellinger limit between intensity-weighted jump
/// densities. Label permutations do not affect it.
inline double scaled_hellinger_distance(const ModelParams& a,
                                        const ModelParams& b) {
  const double h2 = limit_divergence(DivergenceKind::HellingerSq,
                                     a.intensity(), a.jump_density(),
                                     b.intensity(), b.jump_density())
                        .value;
  return std::sqrt(std::max(0.0, h2));
}

namespace detail {
inline constexpr std::uint64_t kContractionDataTag = 0x636f6e7400000001ULL;
inline constexpr std::uint64_t kContractionChainTag = 0x636f6e7400000002ULL;
}  // namespace detail

/// Simulate-fit-measure over the (n, delta) grid; fits the log-log slope of
/// distance against n*delta. Replication failures are recorded per cell and
/// leave a partial table rather than aborting the study.
inline ContractionReport contraction_experiment(const ContractionConfig& cfg) {
  if (cfg.grid.empty() || cfg.replications < 1) {
    throw std::invalid_argument("contraction_experiment: empty design");
  }
  for (std::size_t c = 1; c < cfg.grid.size(); ++c) {
    const double prev =
        static_cast<double>(cfg.grid[c - 1].first) * cfg.grid[c - 1].second;
    const double cur =
        static_cast<double>(cfg.grid[c].first) * cfg.grid[c].second;
    if (!(cur > prev)) {
      throw std::invalid_argument(
          "contraction_experiment: n*delta must be increasing across rows");
    }
  }
  cfg.truth.validate();
  const std::size_t j_count = cfg.truth.component_count();
  ContractionReport report;
  for (std::size_t c = 0; c < cfg.grid.size(); ++c) {
    const auto [n, delta] = cfg.grid[c];
    ContractionCell cell;
    cell.n = n;
    cell.delta = delta;
    cell.n_delta = static_cast<double>(n) * delta;
    const double eps_n = 1.0 / std::sqrt(cell.n_delta);
    std::vector<double> distances;
    double mass_sum = 0.0;
    for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
      try {
        const std::uint64_t data_seed =
            RngStream::substream(cfg.seed, detail::kContractionDataTag,
                                 c * cfg.replications + rep)
                .next_u64();
        const std::uint64_t chain_seed =
            RngStream::substream(cfg.seed, detail::kContractionChainTag,
                                 c * cfg.replications + rep)
                .next_u64();
        const std::vector<double> durations(n, delta);
        auto [obs, aux_truth] =
            simulate_increments(cfg.truth, durations, data_seed);
        const RunResult fit =
            run_chain(obs, cfg.hyper, j_count, cfg.mcmc, chain_seed);
        const ModelParams post_mean = posterior_mean_params(
            fit.trace, cfg.mcmc.burn_in, 1);
        distances.push_back(scaled_hellinger_distance(post_mean, cfg.truth));
        // posterior mass outside the M * eps_n ball, over a capped number
        // of retained draws
        const auto kept =
            detail::retained_rows(fit.trace, cfg.mcmc.burn_in, 1);
        const std::size_t stride =
            std::max<std::size_t>(1, kept.size() / cfg.mass_draw_cap);
        std::size_t used = 0;
        std::size_t outside = 0;
        for (std::size_t r = 0; r < kept.size(); r += stride) {
          ModelParams draw;
          draw.psi = kept[r]->psi;
          draw.means = kept[r]->means;
          draw.precision = kept[r]->precision;
          ++used;
          if (scaled_hellinger_distance(draw, cfg.truth) >
              cfg.ball_constant * eps_n) {
            ++outside;
          }
        }
        mass_sum += static_cast<double>(outside) / static_cast<double>(used);
      } catch (const std::exception&) {
        // leave this replication out; the cell reports how many completed
      }
    }
    cell.completed = distances.size();
    if (!distances.empty()) {
      for (const double d : distances) {
        cell.mean_distance += d;
      }
      cell.mean_distance /= static_cast<double>(distances.size());
      for (const double d : distances) {
        cell.distance_variance += (d - cell.mean_distance) *
                                  (d - cell.mean_distance);
      }
      cell.distance_variance /=
          std::max<double>(1.0, static_cast<double>(distances.size() - 1));
      cell.mass_outside = mass_sum / static_cast<double>(distances.size());
    }
    report.cells.push_back(cell);
  }
  // log-log slope over cells with data
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> y_vars;
  for (const ContractionCell& cell : report.cells) {
    if (cell.completed > 0 && cell.mean_distance > 0.0) {
      xs.push_back(std::log(cell.n_delta));
      ys.push_back(std::log(cell.mean_distance));
      // delta method: var(log dbar) ~ var(d) / (reps * dbar^2)
      y_vars.push_back(cell.distance_variance /
                       (static_cast<double>(cell.completed) *
                        cell.mean_distance * cell.mean_distance));
    }
  }
  if (xs.size() >= 2) {
    double x_mean = 0.0;
    double y_mean = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      x_mean += xs[i];
      y_mean += ys[i];
    }
    x_mean /= static_cast<double>(xs.size());
    y_mean /= static_cast<double>(xs.size());
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - x_mean) * (xs[i] - x_mean);
      sxy += (xs[i] - x_mean) * (ys[i] - y_mean);
    }
    report.slope = sxy / sxx;
    double var = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double w = (xs[i] - x_mean) / sxx;
      var += w * w * y_vars[i];
    }
    report.slope_stderr = std::sqrt(var);
    report.slope_defined = true;
  }
  return report;
}

}  // namespace decompound
