#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "decompound/sampler.hpp"
#include "decompound/simulate.hpp"

using decompound::AuxiliaryState;
using decompound::AuxInitPolicy;
using decompound::ChainState;
using decompound::Hyperparameters;
using decompound::ModelParams;
using decompound::ObservationSet;
using decompound::RngStream;
using decompound::RunOptions;

namespace {

const ModelParams kTwoComponent{{0.8, 0.2}, {2.0, -1.0}, 1.0};

Hyperparameters unit_hyper(std::size_t j_count) {
  Hyperparameters h;
  h.prior_means.assign(j_count, 0.0);
  return h;
}

ObservationSet two_segment_instance() {
  return ObservationSet::from_increments({1.0, 0.7}, {1.3, -0.4});
}

AuxiliaryState aux_from_rows(
    const std::vector<std::vector<std::uint32_t>>& rows) {
  AuxiliaryState aux(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      aux.count(i, j) = rows[i][j];
    }
  }
  return aux;
}

}  // namespace

TEST_CASE("init_aux on an empty nonzero set is empty") {
  const ObservationSet obs =
      ObservationSet::from_increments({1.0, 1.0}, {0.0, 0.0});
  const AuxiliaryState aux = decompound::init_aux(
      obs, kTwoComponent, AuxInitPolicy::PriorConditioned, 1);
  REQUIRE(aux.segment_count() == 0);
}

TEST_CASE("nearest-mean initialization picks the closest component") {
  const ObservationSet obs = ObservationSet::from_increments({1.0}, {1.9});
  const AuxiliaryState aux = decompound::init_aux(
      obs, kTwoComponent, AuxInitPolicy::SingleNearestMean, 1);
  REQUIRE(aux.count(0, 0) == 1);
  REQUIRE(aux.count(0, 1) == 0);
  REQUIRE(aux.segment_total(0) == 1);
}

TEST_CASE("prior-conditioned initialization is deterministic and supported") {
  const std::vector<double> durations(200, 1.0);
  const auto [obs, truth] =
      decompound::simulate_increments(kTwoComponent, durations, 8);
  const AuxiliaryState a = decompound::init_aux(
      obs, kTwoComponent, AuxInitPolicy::PriorConditioned, 5);
  const AuxiliaryState b = decompound::init_aux(
      obs, kTwoComponent, AuxInitPolicy::PriorConditioned, 5);
  REQUIRE(a.segment_count() == obs.nonzero_count());
  for (std::size_t k = 0; k < a.segment_count(); ++k) {
    REQUIRE(a.segment_total(k) >= 1);
    const auto ra = a.row(k);
    const auto rb = b.row(k);
    REQUIRE(std::equal(ra.begin(), ra.end(), rb.begin()));
  }
}

TEST_CASE("single-type proposals put the whole count on one component") {
  const ModelParams single{{1.0}, {0.0}, 1.0};
  RngStream rng(3);
  std::vector<std::uint32_t> counts(1);
  for (int i = 0; i < 200; ++i) {
    decompound::propose_segment(single, 1.0, rng, counts);
    REQUIRE(counts[0] >= 1);
  }
}

TEST_CASE("identity proposal has unit acceptance ratio") {
  const std::vector<std::uint32_t> a{1, 2};
  REQUIRE(decompound::accept_ratio(kTwoComponent, 0.7, a, a) == 1.0);
}

TEST_CASE("equal gaussian heights give unit acceptance ratio") {
  // different labels, same total and same conditional mean
  const ModelParams params{{0.3, 0.3, 0.4}, {1.0, 2.0, 3.0}, 1.7};
  const std::vector<std::uint32_t> a{1, 0, 1};   // mean 4, n 2
  const std::vector<std::uint32_t> b{0, 2, 0};   // mean 4, n 2
  REQUIRE(decompound::accept_ratio(params, 4.0, a, b) ==
          Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("acceptance ratio times proposal ratio equals the joint ratio") {
  // the full Metropolis-Hastings identity, randomized over 100 cases
  RngStream rng(404);
  const ObservationSet obs = two_segment_instance();
  const Hyperparameters hyper = unit_hyper(2);
  for (int trial = 0; trial < 100; ++trial) {
    ModelParams params;
    params.psi = {0.2 + 2.0 * rng.uniform(), 0.2 + 2.0 * rng.uniform()};
    params.means = {4.0 * rng.uniform() - 2.0, 4.0 * rng.uniform() - 2.0};
    params.precision = 0.3 + 2.0 * rng.uniform();
    auto random_counts = [&] {
      std::vector<std::uint32_t> c(2);
      do {
        c[0] = static_cast<std::uint32_t>(rng.uniform() * 4);
        c[1] = static_cast<std::uint32_t>(rng.uniform() * 4);
      } while (c[0] + c[1] == 0);
      return c;
    };
    const auto current = random_counts();
    const auto proposed = random_counts();
    const auto other = random_counts();

    const AuxiliaryState aux_cur = aux_from_rows({current, other});
    const AuxiliaryState aux_prop = aux_from_rows({proposed, other});

    const double log_a = decompound::log_accept_ratio(
        params, obs.increments[0], current, proposed);
    const double log_q_prop =
        decompound::segment_proposal_log_pmf(params, obs.durations[0],
                                             proposed);
    const double log_q_cur = decompound::segment_proposal_log_pmf(
        params, obs.durations[0], current);
    const double lhs = log_a + log_q_prop - log_q_cur;
    const double rhs = decompound::log_joint(params, obs, aux_prop, hyper) -
                       decompound::log_joint(params, obs, aux_cur, hyper);
    REQUIRE(lhs == Catch::Approx(rhs).margin(1e-10));
  }
}

TEST_CASE("flat gaussian limit accepts nearly every proposal") {
  // tau -> 0 removes the z-dependence; the remaining sqrt(n/n') factor is 1
  // whenever the proposed total matches, so at small lambda*Delta the
  // acceptance rate approaches one
  ModelParams flat{{0.04, 0.01}, {2.0, -1.0}, 1e-12};
  const std::vector<double> durations(400, 1.0);
  const auto [obs, truth] = decompound::simulate_increments(
      ModelParams{{0.04, 0.01}, {2.0, -1.0}, 1.0}, durations, 21);
  ChainState state;
  state.params = flat;
  state.aux = decompound::init_aux(obs, flat,
                                   AuxInitPolicy::PriorConditioned, 3);
  state.segment_accepted.assign(obs.nonzero_count(), 0);
  state.segment_proposed.assign(obs.nonzero_count(), 0);
  for (std::uint64_t it = 1; it <= 200; ++it) {
    state.iteration = it;
    decompound::update_segments(state, obs, 77);
  }
  const double rate = static_cast<double>(state.total_accepted()) /
                      static_cast<double>(state.total_proposed());
  REQUIRE(rate > 0.95);
  // and exactly A = 1 when the totals agree
  const std::vector<std::uint32_t> one{1, 0};
  const std::vector<std::uint32_t> other{0, 1};
  REQUIRE(decompound::accept_ratio(flat, 1.4, one, other) ==
          Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("segment updates touch only stored segments and keep tallies") {
  const std::vector<double> durations(300, 1.0);
  const auto [obs, truth] =
      decompound::simulate_increments(kTwoComponent, durations, 44);
  ChainState state;
  state.params = kTwoComponent;
  state.aux = truth;
  state.segment_accepted.assign(obs.nonzero_count(), 0);
  state.segment_proposed.assign(obs.nonzero_count(), 0);
  std::vector<std::uint64_t> last_accepted(obs.nonzero_count(), 0);
  for (std::uint64_t it = 1; it <= 50; ++it) {
    state.iteration = it;
    decompound::update_segments(state, obs, 3);
    REQUIRE(state.aux.segment_count() == obs.nonzero_count());
    for (std::size_t k = 0; k < obs.nonzero_count(); ++k) {
      REQUIRE(state.segment_proposed[k] == it);
      REQUIRE(state.segment_accepted[k] >= last_accepted[k]);
      REQUIRE(state.aux.segment_total(k) >= 1);
      last_accepted[k] = state.segment_accepted[k];
    }
  }
}

TEST_CASE("psi conditional exposes the gamma shape and rate") {
  const Hyperparameters hyper = unit_hyper(2);
  // 800 segments with one type-1 jump each
  AuxiliaryState aux(800, 2);
  for (std::size_t i = 0; i < 800; ++i) {
    aux.count(i, 0) = 1;
  }
  const auto cond = decompound::psi_full_conditional(aux, hyper, 1000.0);
  REQUIRE(cond[0].shape == Catch::Approx(801.0).epsilon(1e-15));
  REQUIRE(cond[0].rate == Catch::Approx(1001.0).epsilon(1e-15));
  REQUIRE(cond[1].shape == Catch::Approx(1.0).epsilon(1e-15));
  REQUIRE(cond[1].rate == Catch::Approx(1001.0).epsilon(1e-15));
}

TEST_CASE("psi draws match the gamma moments") {
  const Hyperparameters hyper = unit_hyper(1);
  const AuxiliaryState empty(0, 1);
  RngStream rng(5);
  const std::size_t n = 100000;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += decompound::update_psi(empty, hyper, 9.0, rng)[0];
  }
  // psi ~ Gamma(1, 10): mean 0.1
  REQUIRE(std::fabs(sum / n - 0.1) < 0.004);

  AuxiliaryState loaded(800, 1);
  for (std::size_t i = 0; i < 800; ++i) {
    loaded.count(i, 0) = 1;
  }
  double sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum2 += decompound::update_psi(loaded, hyper, 999.0, rng)[0];
  }
  REQUIRE(std::fabs(sum2 / n - 801.0 / 1000.0) < 0.004);
}

TEST_CASE("precision matrix matches the hand-computed example") {
  // one segment, J=2, counts (2,1), kappa = 1
  const ObservationSet obs = ObservationSet::from_increments({1.0}, {0.9});
  const AuxiliaryState aux = aux_from_rows({{2, 1}});
  const auto cond =
      decompound::mu_tau_full_conditional(obs, aux, unit_hyper(2));
  REQUIRE(cond.precision_matrix[0] == Catch::Approx(7.0 / 3.0).epsilon(1e-15));
  REQUIRE(cond.precision_matrix[1] == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  REQUIRE(cond.precision_matrix[2] == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  REQUIRE(cond.precision_matrix[3] == Catch::Approx(4.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("empty nonzero set reduces the conditional to the prior") {
  const ObservationSet obs =
      ObservationSet::from_increments({1.0, 2.0}, {0.0, 0.0});
  const AuxiliaryState aux(0, 2);
  Hyperparameters hyper = unit_hyper(2);
  hyper.tau_shape = 1.3;
  hyper.tau_rate = 0.8;
  const auto cond = decompound::mu_tau_full_conditional(obs, aux, hyper);
  REQUIRE(cond.tau_shape == Catch::Approx(1.3).epsilon(1e-15));
  REQUIRE(cond.tau_rate == Catch::Approx(0.8).epsilon(1e-15));
  REQUIRE(cond.degenerate_rate);  // flagged, not failed
  REQUIRE(cond.mean[0] == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(cond.mean[1] == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(cond.precision_matrix[0] == Catch::Approx(1.0));
  REQUIRE(cond.precision_matrix[1] == Catch::Approx(0.0));
}

TEST_CASE("mu tau conditional matches the normal-gamma oracle") {
  // J = 1 with every n_i = 1 is plain gaussian conjugacy: compare against
  // the textbook normal-gamma update computed independently
  const std::vector<double> z{0.8, -0.2, 1.4, 0.6, 2.1};
  const std::size_t m = z.size();
  ObservationSet obs = ObservationSet::from_increments(
      std::vector<double>(m, 1.0), std::vector<double>(z));
  AuxiliaryState aux(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    aux.count(i, 0) = 1;
  }
  Hyperparameters hyper = unit_hyper(1);
  hyper.prior_means = {0.4};
  hyper.mean_precision_scale = 2.5;
  hyper.tau_shape = 1.7;
  hyper.tau_rate = 0.9;

  const auto cond = decompound::mu_tau_full_conditional(obs, aux, hyper);

  const double kappa = hyper.mean_precision_scale;
  const double xi = hyper.prior_means[0];
  const double z_bar =
      std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(m);
  double ss = 0.0;
  for (const double v : z) {
    ss += (v - z_bar) * (v - z_bar);
  }
  const double md = static_cast<double>(m);
  const double kappa_n = kappa + md;
  const double mean_n = (kappa * xi + md * z_bar) / kappa_n;
  const double shape_n = hyper.tau_shape + md / 2.0;
  const double rate_n = hyper.tau_rate + 0.5 * ss +
                        kappa * md * (z_bar - xi) * (z_bar - xi) /
                            (2.0 * kappa_n);

  REQUIRE(cond.precision_matrix[0] == Catch::Approx(kappa_n).margin(1e-12));
  REQUIRE(cond.mean[0] == Catch::Approx(mean_n).margin(1e-12));
  REQUIRE(cond.tau_shape == Catch::Approx(shape_n).margin(1e-12));
  REQUIRE(cond.tau_rate == Catch::Approx(rate_n).margin(1e-12));
}

TEST_CASE("residual quadratic form is never negative") {
  RngStream rng(606);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * 6);
    std::vector<double> durations(m, 1.0);
    std::vector<double> z(m);
    for (auto& v : z) {
      v = 6.0 * rng.uniform() - 3.0;
    }
    const ObservationSet obs =
        ObservationSet::from_increments(durations, z);
    AuxiliaryState aux(obs.nonzero_count(), 2);
    for (std::size_t k = 0; k < aux.segment_count(); ++k) {
      aux.count(k, 0) = static_cast<std::uint32_t>(rng.uniform() * 3);
      aux.count(k, 1) = static_cast<std::uint32_t>(rng.uniform() * 3);
      if (aux.segment_total(k) == 0) {
        aux.count(k, 0) = 1;
      }
    }
    Hyperparameters hyper = unit_hyper(2);
    hyper.prior_means = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
    hyper.mean_precision_scale = 0.2 + 2.0 * rng.uniform();
    const auto cond = decompound::mu_tau_full_conditional(obs, aux, hyper);
    REQUIRE(cond.tau_rate >= hyper.tau_rate - 1e-10);
  }
}

TEST_CASE("log joint reproduces the segment conditional by enumeration") {
  // 2 segments, J=2, counts capped at n_i <= 4: normalizing exp(log_joint)
  // over one segment's states must reproduce the conditional
  // phi(z; a'mu, n/tau) prod_j (psi_j D)^{n_j} / n_j!
  const ObservationSet obs = two_segment_instance();
  const Hyperparameters hyper = unit_hyper(2);
  const ModelParams params{{0.8, 0.2}, {2.0, -1.0}, 1.0};

  std::vector<std::vector<std::uint32_t>> states;
  for (std::uint32_t n = 1; n <= 4; ++n) {
    for (std::uint32_t a = 0; a <= n; ++a) {
      states.push_back({a, n - a});
    }
  }
  const std::vector<std::uint32_t> fixed_other{1, 0};

  std::vector<double> joint_weights;
  std::vector<double> direct_weights;
  for (const auto& s : states) {
    joint_weights.push_back(std::exp(decompound::log_joint(
        params, obs, aux_from_rows({s, fixed_other}), hyper)));
    const double n = static_cast<double>(s[0] + s[1]);
    const double mean = s[0] * 2.0 + s[1] * (-1.0);
    double w = decompound::normal_pdf(obs.increments[0], mean,
                                      n / params.precision);
    w *= std::pow(params.psi[0] * obs.durations[0], s[0]) /
         std::tgamma(s[0] + 1.0);
    w *= std::pow(params.psi[1] * obs.durations[0], s[1]) /
         std::tgamma(s[1] + 1.0);
    direct_weights.push_back(w);
  }
  const double joint_total =
      std::accumulate(joint_weights.begin(), joint_weights.end(), 0.0);
  const double direct_total =
      std::accumulate(direct_weights.begin(), direct_weights.end(), 0.0);
  for (std::size_t s = 0; s < states.size(); ++s) {
    REQUIRE(joint_weights[s] / joint_total ==
            Catch::Approx(direct_weights[s] / direct_total).margin(1e-10));
  }
}

TEST_CASE("log joint is additive across disjoint data up to one prior") {
  const ModelParams params{{0.5, 0.9}, {1.0, -0.5}, 1.4};
  const Hyperparameters hyper = unit_hyper(2);
  const ObservationSet d1 =
      ObservationSet::from_increments({1.0, 0.5}, {0.7, 0.0});
  const ObservationSet d2 = ObservationSet::from_increments({2.0}, {-1.1});
  const ObservationSet both =
      ObservationSet::from_increments({1.0, 0.5, 2.0}, {0.7, 0.0, -1.1});
  const AuxiliaryState a1 = aux_from_rows({{1, 1}});
  const AuxiliaryState a2 = aux_from_rows({{0, 2}});
  const AuxiliaryState a_both = aux_from_rows({{1, 1}, {0, 2}});

  double log_prior =
      decompound::gamma_log_pdf(params.precision, hyper.tau_shape,
                                hyper.tau_rate);
  for (std::size_t j = 0; j < 2; ++j) {
    log_prior += decompound::gamma_log_pdf(params.psi[j], hyper.psi_shape,
                                           hyper.psi_rate);
    log_prior += decompound::normal_log_pdf(
        params.means[j], hyper.prior_means[j],
        1.0 / (params.precision * hyper.mean_precision_scale));
  }
  const double lhs = decompound::log_joint(params, both, a_both, hyper);
  const double rhs = decompound::log_joint(params, d1, a1, hyper) +
                     decompound::log_joint(params, d2, a2, hyper) - log_prior;
  REQUIRE(lhs == Catch::Approx(rhs).margin(1e-10));
}

TEST_CASE("log joint is invariant under segment permutation") {
  const ModelParams params{{0.5, 0.9}, {1.0, -0.5}, 1.4};
  const Hyperparameters hyper = unit_hyper(2);
  const ObservationSet fwd =
      ObservationSet::from_increments({1.0, 0.5, 2.0}, {0.7, 0.3, -1.1});
  const ObservationSet rev =
      ObservationSet::from_increments({2.0, 0.5, 1.0}, {-1.1, 0.3, 0.7});
  const AuxiliaryState aux_fwd = aux_from_rows({{1, 1}, {1, 0}, {0, 2}});
  const AuxiliaryState aux_rev = aux_from_rows({{0, 2}, {1, 0}, {1, 1}});
  REQUIRE(decompound::log_joint(params, fwd, aux_fwd, hyper) ==
          Catch::Approx(decompound::log_joint(params, rev, aux_rev, hyper))
              .margin(1e-12));
}

TEST_CASE("log joint flags inconsistent auxiliary states") {
  const ObservationSet obs = two_segment_instance();
  const Hyperparameters hyper = unit_hyper(2);
  const AuxiliaryState wrong_size = aux_from_rows({{1, 0}});
  REQUIRE(std::isinf(
      decompound::log_joint(kTwoComponent, obs, wrong_size, hyper)));
}

TEST_CASE("chain records every thin-th iterate and exact intensities") {
  const std::vector<double> durations(100, 1.0);
  const auto [obs, truth] =
      decompound::simulate_increments(kTwoComponent, durations, 17);
  RunOptions opt;
  opt.n_iter = 40;
  opt.thin = 1;
  const auto result = decompound::run_chain(obs, unit_hyper(2), 2, opt, 12);
  REQUIRE(result.trace.rows.size() == 40);
  for (const auto& row : result.trace.rows) {
    REQUIRE(row.intensity == row.psi[0] + row.psi[1]);
  }
  RunOptions thinned = opt;
  thinned.n_iter = 41;
  thinned.thin = 5;
  const auto r2 = decompound::run_chain(obs, unit_hyper(2), 2, thinned, 12);
  REQUIRE(r2.trace.rows.size() == 8);
  REQUIRE(r2.trace.rows.front().iteration == 5);
  REQUIRE(r2.trace.rows.back().iteration == 40);
}

TEST_CASE("chains are deterministic under a fixed seed") {
  const std::vector<double> durations(150, 1.0);
  const auto [obs, truth] =
      decompound::simulate_increments(kTwoComponent, durations, 29);
  RunOptions opt;
  opt.n_iter = 60;
  opt.burn_in = 10;
  const auto a = decompound::run_chain(obs, unit_hyper(2), 2, opt, 31);
  const auto b = decompound::run_chain(obs, unit_hyper(2), 2, opt, 31);
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (std::size_t r = 0; r < a.trace.rows.size(); ++r) {
    REQUIRE(a.trace.rows[r].psi == b.trace.rows[r].psi);
    REQUIRE(a.trace.rows[r].means == b.trace.rows[r].means);
    REQUIRE(a.trace.rows[r].precision == b.trace.rows[r].precision);
  }
  REQUIRE(a.acceptance_rate == b.acceptance_rate);
  const auto c = decompound::run_chain(obs, unit_hyper(2), 2, opt, 32);
  REQUIRE(a.trace.rows.back().psi != c.trace.rows.back().psi);
}
