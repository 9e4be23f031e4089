#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "decompound/rng.hpp"
#include "test_support.hpp"

using decompound::RngStream;

TEST_CASE("streams are deterministic and substreams distinct") {
  RngStream a(42);
  RngStream b(42);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
  RngStream s1 = RngStream::substream(42, 1, 7);
  RngStream s2 = RngStream::substream(42, 1, 8);
  RngStream s3 = RngStream::substream(42, 2, 7);
  const auto v1 = s1.next_u64();
  REQUIRE(v1 != s2.next_u64());
  REQUIRE(v1 != s3.next_u64());
  RngStream s1_again = RngStream::substream(42, 1, 7);
  REQUIRE(v1 == s1_again.next_u64());
}

TEST_CASE("uniform stays inside the open unit interval") {
  RngStream rng(7);
  double lo = 1.0;
  double hi = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  REQUIRE(lo < 0.001);
  REQUIRE(hi > 0.999);
}

TEST_CASE("normal draws match the standard normal cdf") {
  RngStream rng(11);
  std::vector<double> sample(100000);
  for (auto& x : sample) {
    x = rng.normal();
  }
  const double d =
      test_support::ks_statistic(sample, test_support::normal_cdf);
  REQUIRE(d < 0.006);  // 1.36/sqrt(1e5) ~ 0.0043 at the 5% level
}

TEST_CASE("gamma draws match the gamma cdf in both shape regimes") {
  for (const auto [shape, rate] : {std::pair{0.7, 2.0},
                                   std::pair{1.0, 1.0},
                                   std::pair{801.0, 1001.0}}) {
    RngStream rng(23);
    std::vector<double> sample(100000);
    for (auto& x : sample) {
      x = rng.gamma(shape, rate);
    }
    const double d = test_support::ks_statistic(sample, [=](double x) {
      return test_support::gamma_cdf(x, shape, rate);
    });
    INFO("shape " << shape << " rate " << rate);
    REQUIRE(d < 0.006);
  }
}

namespace {

void check_poisson_pmf(double mean, std::uint64_t seed) {
  RngStream rng(seed);
  const std::size_t n = 200000;
  const std::size_t cells = static_cast<std::size_t>(mean + 8 * std::sqrt(mean) + 8);
  std::vector<double> observed(cells + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t k = rng.poisson(mean);
    observed[std::min<std::uint64_t>(k, cells)] += 1.0;
  }
  // expected counts, last cell absorbs the tail
  std::vector<double> expected(cells + 1, 0.0);
  double p = std::exp(-mean);
  double cdf = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    expected[k] = n * p;
    cdf += p;
    p *= mean / static_cast<double>(k + 1);
  }
  expected[cells] = n * std::max(0.0, 1.0 - cdf);
  // merge sparse cells into neighbors to keep the chi-square valid
  std::vector<double> obs_m;
  std::vector<double> exp_m;
  double o_acc = 0.0;
  double e_acc = 0.0;
  for (std::size_t k = 0; k <= cells; ++k) {
    o_acc += observed[k];
    e_acc += expected[k];
    if (e_acc >= 10.0) {
      obs_m.push_back(o_acc);
      exp_m.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 && !exp_m.empty()) {
    obs_m.back() += o_acc;
    exp_m.back() += e_acc;
  }
  const double stat = test_support::chi_square_statistic(obs_m, exp_m);
  const double crit = test_support::chi_square_critical(obs_m.size() - 1, 0.001);
  INFO("mean " << mean << " stat " << stat << " crit " << crit);
  REQUIRE(stat < crit);
}

}  // namespace

TEST_CASE("poisson sampling matches the pmf in both regimes") {
  check_poisson_pmf(0.3, 101);   // inversion
  check_poisson_pmf(3.0, 102);   // inversion
  check_poisson_pmf(45.0, 103);  // PTRS rejection
}

TEST_CASE("poisson mean and variance at a large mean") {
  RngStream rng(5);
  const double mean = 5000.0;
  const std::size_t n = 50000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(rng.poisson(mean));
    sum += k;
    sum_sq += k * k;
  }
  const double m = sum / n;
  const double v = sum_sq / n - m * m;
  REQUIRE(std::fabs(m - mean) < 4.0 * std::sqrt(mean / n));
  REQUIRE(std::fabs(v - mean) / mean < 0.05);
}

TEST_CASE("zero-truncated poisson matches the truncated pmf") {
  const double mean = 1.0;
  RngStream rng(31);
  const std::size_t n = 1000000;
  std::vector<double> observed(12, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t k = rng.zero_truncated_poisson(mean);
    REQUIRE(k >= 1);
    observed[std::min<std::uint64_t>(k, 11)] += 1.0;
  }
  std::vector<double> expected(12, 0.0);
  const double denom = std::expm1(mean);  // e^mean - 1
  double term = 1.0;                      // mean^k / k! at k=0
  double cdf = 0.0;
  for (std::size_t k = 1; k <= 10; ++k) {
    term *= mean / static_cast<double>(k);
    expected[k] = n * term / denom;
    cdf += term / denom;
  }
  expected[11] = n * std::max(0.0, 1.0 - cdf);
  std::vector<double> obs_m(observed.begin() + 1, observed.begin() + 8);
  std::vector<double> exp_m(expected.begin() + 1, expected.begin() + 8);
  obs_m.push_back(0.0);
  exp_m.push_back(0.0);
  for (std::size_t k = 8; k < 12; ++k) {
    obs_m.back() += observed[k];
    exp_m.back() += expected[k];
  }
  const double stat = test_support::chi_square_statistic(obs_m, exp_m);
  REQUIRE(stat < test_support::chi_square_critical(obs_m.size() - 1, 0.001));
}

TEST_CASE("zero-truncated poisson never returns zero for extreme means") {
  RngStream rng(77);
  for (const double mean : {1e-9, 0.01, 29.9, 35.0, 200.0}) {
    for (int i = 0; i < 200; ++i) {
      REQUIRE(rng.zero_truncated_poisson(mean) >= 1);
    }
  }
}

TEST_CASE("multinomial splits follow the binomial marginal") {
  RngStream rng(13);
  const std::vector<double> probs{0.8, 0.2};
  const std::uint64_t total = 6;
  const std::size_t n = 200000;
  std::vector<double> observed(total + 1, 0.0);
  std::vector<std::uint32_t> counts(2);
  for (std::size_t i = 0; i < n; ++i) {
    rng.multinomial(total, probs, counts);
    REQUIRE(counts[0] + counts[1] == total);
    observed[counts[0]] += 1.0;
  }
  std::vector<double> expected(total + 1, 0.0);
  for (std::uint64_t k = 0; k <= total; ++k) {
    double log_p = std::lgamma(7.0) - std::lgamma(k + 1.0) -
                   std::lgamma(7.0 - k) + k * std::log(0.8) +
                   (6.0 - k) * std::log(0.2);
    expected[k] = n * std::exp(log_p);
  }
  const double stat = test_support::chi_square_statistic(observed, expected);
  REQUIRE(stat < test_support::chi_square_critical(total, 0.001));
}
