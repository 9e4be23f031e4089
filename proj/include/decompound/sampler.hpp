#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "decompound/cholesky.hpp"
#include "decompound/mixture.hpp"
#include "decompound/observations.hpp"
#include "decompound/rng.hpp"

namespace decompound {

// Substream keys used by the sampler. Segment updates in iteration t draw
// from substream(seed, t, i) where i is the segment's index in the
// observation set; parameter updates draw from substream(seed, t, sentinel).
// Initialization uses iteration 0. The sentinels sit far above any segment
// index, so streams never collide.
inline constexpr std::uint64_t kPsiUpdateKey = 0xffffffff00000001ULL;
inline constexpr std::uint64_t kMuTauUpdateKey = 0xffffffff00000002ULL;
inline constexpr std::uint64_t kParamsInitKey = 0xffffffff00000003ULL;
inline constexpr std::uint64_t kAuxInitBase = 0x8000000000000000ULL;

/// Prior hyperparameters: psi_j iid Gamma(psi_shape, psi_rate), tau ~
/// Gamma(tau_shape, tau_rate), mu | tau ~ N(prior_means,
/// (tau * mean_precision_scale)^{-1} I).
struct Hyperparameters {
  double psi_shape = 1.0;
  double psi_rate = 1.0;
  double tau_shape = 1.0;
  double tau_rate = 1.0;
  std::vector<double> prior_means;
  double mean_precision_scale = 1.0;

  void validate(std::size_t j_count) const {
    if (!(psi_shape > 0.0) || !(psi_rate > 0.0) || !(tau_shape > 0.0) ||
        !(tau_rate > 0.0) || !(mean_precision_scale > 0.0)) {
      throw std::invalid_argument(
          "Hyperparameters: shape/rate/scale parameters must be positive");
    }
    if (prior_means.size() != j_count) {
      throw std::invalid_argument(
          "Hyperparameters: prior_means length must equal component count");
    }
  }
};

enum class AuxInitPolicy { PriorConditioned, SingleNearestMean };

/// Proposal for one segment's type counts: total from a zero-truncated
/// Poisson(lambda * duration), split multinomially with weights psi_j /
/// lambda. Writes the counts into out (length J).
inline void propose_segment(const ModelParams& params, double duration,
                            RngStream& rng, std::span<std::uint32_t> out) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("propose_segment: duration must be positive");
  }
  const Reparametrisation r = reparametrise(params.psi);
  const std::uint64_t total =
      rng.zero_truncated_poisson(r.intensity * duration);
  rng.multinomial(total, r.weights, out);
}

/// Log proposal mass of a counts vector under the segment proposal:
/// log[ e^{-lambda D} / (1 - e^{-lambda D}) * prod_j (psi_j D)^{n_j} / n_j! ].
inline double segment_proposal_log_pmf(const ModelParams& params,
                                       double duration,
                                       std::span<const std::uint32_t> counts) {
  const double rate = params.intensity() * duration;
  double value = -rate - std::log(-std::expm1(-rate));
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const double n = static_cast<double>(counts[j]);
    value += n * std::log(params.psi[j] * duration) - std::lgamma(n + 1.0);
  }
  return value;
}

/// Log of the Metropolis-Hastings ratio for a segment proposal. The Poisson
/// factors of the target cancel against the proposal mass, leaving the ratio
/// of the two Gaussian heights phi(z; a'mu, n/tau):
///   log A = (1/2) log(n/n') + (tau/2) [ (z - m)^2 / n - (z - m')^2 / n' ].
inline double log_accept_ratio(const ModelParams& params, double z,
                               std::span<const std::uint32_t> current,
                               std::span<const std::uint32_t> proposed) {
  double m_cur = 0.0;
  double m_prop = 0.0;
  double n_cur = 0.0;
  double n_prop = 0.0;
  for (std::size_t j = 0; j < current.size(); ++j) {
    m_cur += static_cast<double>(current[j]) * params.means[j];
    m_prop += static_cast<double>(proposed[j]) * params.means[j];
    n_cur += static_cast<double>(current[j]);
    n_prop += static_cast<double>(proposed[j]);
  }
  if (!(n_cur >= 1.0) || !(n_prop >= 1.0)) {
    throw std::invalid_argument(
        "log_accept_ratio: counts must total at least one jump");
  }
  const double d_cur = z - m_cur;
  const double d_prop = z - m_prop;
  double value = 0.5 * params.precision *
                 (d_cur * d_cur / n_cur - d_prop * d_prop / n_prop);
  if (n_cur != n_prop) {
    value += 0.5 * std::log(n_cur / n_prop);
  }
  return value;
}

/// Acceptance ratio A with acceptance probability 1 and A; may exceed 1.
inline double accept_ratio(const ModelParams& params, double z,
                           std::span<const std::uint32_t> current,
                           std::span<const std::uint32_t> proposed) {
  return std::exp(log_accept_ratio(params, z, current, proposed));
}

/// Initial auxiliary counts for every nonzero segment. PriorConditioned
/// draws each segment from the proposal distribution (zero-truncated Poisson
/// plus multinomial split); SingleNearestMean assigns one jump of the type
/// whose mean is closest to the increment.
inline AuxiliaryState init_aux(const ObservationSet& obs,
                               const ModelParams& params,
                               AuxInitPolicy policy, std::uint64_t seed) {
  params.validate();
  AuxiliaryState aux(obs.nonzero_count(), params.component_count());
  for (std::size_t k = 0; k < obs.nonzero.size(); ++k) {
    const std::size_t i = obs.nonzero[k];
    auto row = aux.row(k);
    if (policy == AuxInitPolicy::PriorConditioned) {
      RngStream rng = RngStream::substream(seed, 0, kAuxInitBase + i);
      propose_segment(params, obs.durations[i], rng, row);
    } else {
      const double z = obs.increments[i];
      std::size_t best = 0;
      for (std::size_t j = 1; j < params.means.size(); ++j) {
        if (std::fabs(z - params.means[j]) <
            std::fabs(z - params.means[best])) {
          best = j;
        }
      }
      row[best] = 1;
    }
  }
  return aux;
}

/// Markov chain state: current parameters, auxiliary counts for the nonzero
/// segments, and per-segment acceptance bookkeeping.
struct ChainState {
  ModelParams params;
  AuxiliaryState aux;
  std::uint64_t iteration = 0;
  std::vector<std::uint64_t> segment_accepted;
  std::vector<std::uint64_t> segment_proposed;

  std::uint64_t total_accepted() const {
    std::uint64_t s = 0;
    for (const auto a : segment_accepted) {
      s += a;
    }
    return s;
  }
  std::uint64_t total_proposed() const {
    std::uint64_t s = 0;
    for (const auto p : segment_proposed) {
      s += p;
    }
    return s;
  }
};

/// One Metropolis-within-Gibbs sweep over the nonzero segments: propose,
/// accept with probability 1 and A, update tallies. Segments are
/// conditionally independent given the parameters; each uses the substream
/// keyed by (seed, iteration, segment index), so the sweep's result does not
/// depend on traversal order.
inline void update_segments(ChainState& state, const ObservationSet& obs,
                            std::uint64_t seed) {
  const ModelParams& params = state.params;
  const std::size_t j_count = params.component_count();
  const double lambda = params.intensity();
  const double tau = params.precision;
  std::vector<double> rho(j_count);
  for (std::size_t j = 0; j < j_count; ++j) {
    rho[j] = params.psi[j] / lambda;
  }
  std::vector<std::uint32_t> proposal(j_count);
  for (std::size_t k = 0; k < obs.nonzero.size(); ++k) {
    const std::size_t i = obs.nonzero[k];
    RngStream rng = RngStream::substream(seed, state.iteration, i);
    const std::uint64_t n_prop =
        rng.zero_truncated_poisson(lambda * obs.durations[i]);
    rng.multinomial(n_prop, rho, proposal);
    const double z = obs.increments[i];
    auto cur = state.aux.row(k);
    double m_cur = 0.0;
    double m_prop = 0.0;
    double n_cur = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
      m_cur += static_cast<double>(cur[j]) * params.means[j];
      m_prop += static_cast<double>(proposal[j]) * params.means[j];
      n_cur += static_cast<double>(cur[j]);
    }
    const double d_cur = z - m_cur;
    const double d_prop = z - m_prop;
    const double np = static_cast<double>(n_prop);
    double log_a = 0.5 * tau * (d_cur * d_cur / n_cur - d_prop * d_prop / np);
    if (n_cur != np) {
      log_a += 0.5 * std::log(n_cur / np);
    }
    ++state.segment_proposed[k];
    if (log_a >= 0.0 || std::log(rng.uniform()) < log_a) {
      std::copy(proposal.begin(), proposal.end(), cur.begin());
      ++state.segment_accepted[k];
    }
  }
}

struct GammaParams {
  double shape = 0.0;
  double rate = 0.0;
};

/// Conditional law of psi given the auxiliary counts: psi_j independent
/// Gamma(psi_shape + s_j, psi_rate + T) with T the total observation time.
inline std::vector<GammaParams> psi_full_conditional(
    const AuxiliaryState& aux, const Hyperparameters& hyper,
    double total_time) {
  if (!(total_time > 0.0)) {
    throw std::invalid_argument(
        "psi_full_conditional: total time must be positive");
  }
  const std::vector<std::uint64_t> s = aux.type_totals();
  std::vector<GammaParams> out(aux.component_count());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j].shape = hyper.psi_shape + static_cast<double>(s[j]);
    out[j].rate = hyper.psi_rate + total_time;
  }
  return out;
}

inline std::vector<double> update_psi(const AuxiliaryState& aux,
                                      const Hyperparameters& hyper,
                                      double total_time, RngStream& rng) {
  const std::vector<GammaParams> cond =
      psi_full_conditional(aux, hyper, total_time);
  std::vector<double> psi(cond.size());
  for (std::size_t j = 0; j < psi.size(); ++j) {
    psi[j] = rng.gamma(cond[j].shape, cond[j].rate);
  }
  return psi;
}

/// Conditional law of (mu, tau) given data and auxiliary counts:
///   tau ~ Gamma(tau_shape + I/2, tau_rate + (R - q'P^{-1}q)/2),
///   mu | tau ~ N(P^{-1} q, tau^{-1} P^{-1}),
/// with P = kappa I + sum_i n_i^{-1} a_i a_i', q_j = kappa xi_j +
/// sum_i n_i^{-1} n_ij z_i and R = kappa sum_j xi_j^2 + sum_i n_i^{-1} z_i^2.
/// All solves go through the Cholesky factor of P.
struct MuTauConditional {
  std::vector<double> precision_matrix;  // P, row-major J x J
  std::vector<double> linear_term;       // q
  double quadratic_constant = 0.0;       // R
  double tau_shape = 0.0;
  double tau_rate = 0.0;
  std::vector<double> mean;              // P^{-1} q
  CholeskyFactor factor;                 // of P
  bool degenerate_rate = false;          // R - q'P^{-1}q vanished numerically
};

inline MuTauConditional mu_tau_full_conditional(const ObservationSet& obs,
                                                const AuxiliaryState& aux,
                                                const Hyperparameters& hyper) {
  const std::size_t j_count = aux.component_count();
  hyper.validate(j_count);
  if (aux.segment_count() != obs.nonzero_count()) {
    throw std::invalid_argument(
        "mu_tau_full_conditional: auxiliary state does not match data");
  }
  MuTauConditional cond;
  cond.precision_matrix.assign(j_count * j_count, 0.0);
  cond.linear_term.assign(j_count, 0.0);
  const double kappa = hyper.mean_precision_scale;
  for (std::size_t j = 0; j < j_count; ++j) {
    cond.precision_matrix[j * j_count + j] = kappa;
    cond.linear_term[j] = kappa * hyper.prior_means[j];
    cond.quadratic_constant +=
        kappa * hyper.prior_means[j] * hyper.prior_means[j];
  }
  for (std::size_t k = 0; k < aux.segment_count(); ++k) {
    const auto row = aux.row(k);
    const double n_inv = 1.0 / static_cast<double>(aux.segment_total(k));
    const double z = obs.increments[obs.nonzero[k]];
    for (std::size_t a = 0; a < j_count; ++a) {
      const double na = static_cast<double>(row[a]);
      if (na == 0.0) {
        continue;
      }
      cond.linear_term[a] += n_inv * na * z;
      for (std::size_t b = 0; b < j_count; ++b) {
        cond.precision_matrix[a * j_count + b] +=
            n_inv * na * static_cast<double>(row[b]);
      }
    }
    cond.quadratic_constant += n_inv * z * z;
  }
  cond.factor = CholeskyFactor::decompose(cond.precision_matrix, j_count);
  cond.mean = cond.factor.solve(cond.linear_term);
  const double quad = cond.factor.inverse_quadratic_form(cond.linear_term);
  double residual = cond.quadratic_constant - quad;
  if (residual < -1e-10) {
    throw std::runtime_error(
        "mu_tau_full_conditional: R - q'P^{-1}q is negative beyond numerical "
        "slack");
  }
  if (residual <= 0.0) {
    cond.degenerate_rate = true;
    residual = 0.0;
  }
  cond.tau_shape =
      hyper.tau_shape + 0.5 * static_cast<double>(aux.segment_count());
  cond.tau_rate = hyper.tau_rate + 0.5 * residual;
  return cond;
}

/// Joint draw of (mu, tau): tau first, then mu given tau.
inline std::pair<std::vector<double>, double> update_mu_tau(
    const MuTauConditional& cond, RngStream& rng) {
  const double tau = rng.gamma(cond.tau_shape, cond.tau_rate);
  const std::size_t j_count = cond.mean.size();
  std::vector<double> noise(j_count);
  for (auto& v : noise) {
    v = rng.normal();
  }
  std::vector<double> mu = cond.factor.solve_transposed(noise);
  const double scale = 1.0 / std::sqrt(tau);
  for (std::size_t j = 0; j < j_count; ++j) {
    mu[j] = cond.mean[j] + scale * mu[j];
  }
  return {std::move(mu), tau};
}

inline double gamma_log_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

/// Log of the joint density p(theta, z, a): prior times
/// prod_i [ phi(z_i; a_i'mu, n_i/tau) prod_j e^{-psi_j D_i}
/// (psi_j D_i)^{n_ij} / n_ij! ]. The single source of truth the update
/// steps are tested against. Returns -infinity when the auxiliary state is
/// inconsistent with the data (a stored segment without jumps).
inline double log_joint(const ModelParams& params, const ObservationSet& obs,
                        const AuxiliaryState& aux,
                        const Hyperparameters& hyper) {
  params.validate();
  const std::size_t j_count = params.component_count();
  hyper.validate(j_count);
  if (aux.segment_count() != obs.nonzero_count() ||
      aux.component_count() != j_count) {
    return -std::numeric_limits<double>::infinity();
  }
  const double kappa = hyper.mean_precision_scale;
  const double tau = params.precision;
  double value = gamma_log_pdf(tau, hyper.tau_shape, hyper.tau_rate);
  for (std::size_t j = 0; j < j_count; ++j) {
    value += gamma_log_pdf(params.psi[j], hyper.psi_shape, hyper.psi_rate);
    value += normal_log_pdf(params.means[j], hyper.prior_means[j],
                            1.0 / (tau * kappa));
  }
  // Poisson factors e^{-psi_j D_i} over all segments collapse to -lambda T.
  value -= params.intensity() * obs.total_time();
  for (std::size_t k = 0; k < aux.segment_count(); ++k) {
    const std::size_t i = obs.nonzero[k];
    const auto row = aux.row(k);
    const std::uint64_t n_total = aux.segment_total(k);
    if (n_total == 0) {
      return -std::numeric_limits<double>::infinity();
    }
    double mean = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
      const double n = static_cast<double>(row[j]);
      mean += n * params.means[j];
      if (row[j] > 0) {
        value += n * std::log(params.psi[j] * obs.durations[i]) -
                 std::lgamma(n + 1.0);
      }
    }
    value += normal_log_pdf(obs.increments[i], mean,
                            static_cast<double>(n_total) / tau);
  }
  return value;
}

/// One stored iterate of the chain.
struct TraceRow {
  std::uint64_t iteration = 0;
  std::vector<double> psi;
  std::vector<double> means;
  double precision = 0.0;
  double intensity = 0.0;  // always the row-wise sum of psi
};

struct Trace {
  std::size_t component_count = 0;
  std::uint64_t thin = 1;
  std::uint64_t burn_in = 0;
  std::vector<TraceRow> rows;
};

struct RunOptions {
  std::uint64_t n_iter = 1;
  std::uint64_t thin = 1;
  std::uint64_t burn_in = 0;
  AuxInitPolicy init_policy = AuxInitPolicy::PriorConditioned;
};

struct RunResult {
  Trace trace;
  ChainState state;
  double acceptance_rate = 0.0;        // over all iterations
  double post_burn_acceptance = 0.0;   // over iterations after burn_in
};

/// Draw the initial parameters from the prior.
inline ModelParams draw_initial_params(const Hyperparameters& hyper,
                                       std::size_t j_count,
                                       std::uint64_t seed) {
  RngStream rng = RngStream::substream(seed, 0, kParamsInitKey);
  ModelParams params;
  params.psi.resize(j_count);
  for (auto& p : params.psi) {
    p = rng.gamma(hyper.psi_shape, hyper.psi_rate);
  }
  params.precision = rng.gamma(hyper.tau_shape, hyper.tau_rate);
  params.means.resize(j_count);
  const double sd =
      1.0 / std::sqrt(params.precision * hyper.mean_precision_scale);
  for (std::size_t j = 0; j < j_count; ++j) {
    params.means[j] = hyper.prior_means[j] + sd * rng.normal();
  }
  return params;
}

/// The two-step scheme: update segments, then parameters (psi, then mu and
/// tau jointly). Records every thin-th iterate. Fully deterministic for a
/// fixed seed.
inline RunResult run_chain(const ObservationSet& obs,
                           const Hyperparameters& hyper, std::size_t j_count,
                           const RunOptions& opt, std::uint64_t seed) {
  if (opt.n_iter < 1) {
    throw std::invalid_argument("run_chain: need at least one iteration");
  }
  if (opt.thin < 1) {
    throw std::invalid_argument("run_chain: thin must be >= 1");
  }
  hyper.validate(j_count);
  const double total_time = obs.total_time();

  RunResult result;
  ChainState& state = result.state;
  state.params = draw_initial_params(hyper, j_count, seed);
  state.aux = init_aux(obs, state.params, opt.init_policy, seed);
  state.segment_accepted.assign(obs.nonzero_count(), 0);
  state.segment_proposed.assign(obs.nonzero_count(), 0);

  Trace& trace = result.trace;
  trace.component_count = j_count;
  trace.thin = opt.thin;
  trace.burn_in = opt.burn_in;
  trace.rows.reserve(opt.n_iter / opt.thin);

  std::uint64_t burn_accepted = 0;
  std::uint64_t burn_proposed = 0;
  for (std::uint64_t iter = 1; iter <= opt.n_iter; ++iter) {
    state.iteration = iter;
    try {
      update_segments(state, obs, seed);
      RngStream psi_rng = RngStream::substream(seed, iter, kPsiUpdateKey);
      state.params.psi = update_psi(state.aux, hyper, total_time, psi_rng);
      RngStream mu_tau_rng =
          RngStream::substream(seed, iter, kMuTauUpdateKey);
      const MuTauConditional cond =
          mu_tau_full_conditional(obs, state.aux, hyper);
      auto [mu, tau] = update_mu_tau(cond, mu_tau_rng);
      state.params.means = std::move(mu);
      state.params.precision = tau;
    } catch (const std::exception& e) {
      throw std::runtime_error("run_chain: iteration " +
                               std::to_string(iter) + ": " + e.what());
    }
    if (iter == opt.burn_in) {
      burn_accepted = state.total_accepted();
      burn_proposed = state.total_proposed();
    }
    if (iter % opt.thin == 0) {
      TraceRow row;
      row.iteration = iter;
      row.psi = state.params.psi;
      row.means = state.params.means;
      row.precision = state.params.precision;
      row.intensity = state.params.intensity();
      trace.rows.push_back(std::move(row));
    }
  }
  const std::uint64_t accepted = state.total_accepted();
  const std::uint64_t proposed = state.total_proposed();
  result.acceptance_rate =
      proposed == 0 ? 0.0
                    : static_cast<double>(accepted) /
                          static_cast<double>(proposed);
  const std::uint64_t pb_proposed = proposed - burn_proposed;
  result.post_burn_acceptance =
      pb_proposed == 0 ? 0.0
                       : static_cast<double>(accepted - burn_accepted) /
                             static_cast<double>(pb_proposed);
  return result;
}

}  // namespace decompound
