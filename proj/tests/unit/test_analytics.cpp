#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dynalloc/analytics.hpp"
#include "dynalloc/error.hpp"
#include "support/oracles.hpp"

using namespace dynalloc;

namespace {

MarketModel bond_stock(double sigma = 0.1459) {
  MarketModel m;
  m.assets = {KouAssetParams{0.0043, 0.0, 0.0, 0.5, 3.0, 3.0},
              KouAssetParams{0.0877, sigma, 0.3191, 0.2333, 4.3608, 5.504}};
  m.risk_free = {true, false};
  m.labels = {"T30", "VWD"};
  return m;
}

}  // namespace

TEST_CASE("parameters are read from the model") {
  const auto p = ClosedFormDsqParams::from_model(bond_stock(), 138.33, 1.0, 100.0);
  CHECK(p.r == 0.0043);
  CHECK(p.mu2 == 0.0877);
  CHECK(p.sigma2 == 0.1459);
  CHECK(p.lambda2 == 0.3191);
  CHECK(p.kappa2_second == doctest::Approx(oracle::kou_kappa2(0.2333, 4.3608, 5.504)).epsilon(1e-8));
  MarketModel both_risky = bond_stock();
  both_risky.risk_free = {false, false};
  both_risky.assets[0].sigma = 0.01;
  CHECK_THROWS_AS(ClosedFormDsqParams::from_model(both_risky, 138.33, 1.0, 100.0), ValidationError);
}

TEST_CASE("closed-form weight by hand") {
  ClosedFormDsqParams p;
  p.r = 0.02;
  p.mu2 = 0.08;
  p.sigma2 = 0.2;
  p.lambda2 = 0.5;
  p.kappa2_second = 0.04;
  p.gamma = 150.0;
  p.T = 2.0;
  const double merton = 0.06 / (0.04 + 0.02);
  CHECK(p.merton_ratio() == doctest::Approx(merton));
  const double target = 150.0 * std::exp(-0.02 * 1.5);
  CHECK(dsq_closed_form_weight(p, 0.5, 100.0) == doctest::Approx(merton * (target - 100.0) / 100.0));
  CHECK(dsq_closed_form_weight(p, 2.0, 150.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(dsq_closed_form_weight(p, 2.0, 200.0) < 0.0);
  double prev = INFINITY;
  for (double w = 10.0; w < 300.0; w += 5.0) {
    const double x = dsq_closed_form_weight(p, 1.0, w);
    CHECK(x < prev);
    prev = x;
  }
  CHECK_THROWS_WITH_AS(dsq_closed_form_weight(p, 0.0, 0.0), "insolvent state outside closed-form domain",
                       ValidationError);
  CHECK_THROWS_WITH_AS(dsq_closed_form_weight(p, 0.0, -5.0), "insolvent state outside closed-form domain",
                       ValidationError);
}

TEST_CASE("risky drift equal to the rate leaves wealth on the risk-free path") {
  auto m = bond_stock();
  m.assets[1].mu = 0.0043;
  auto p = ClosedFormDsqParams::from_model(m, 138.33, 1.0, 100.0);
  CHECK(p.merton_ratio() == 0.0);
  for (double w : simulate_closed_form_dsq(p, m, 500, 50, 3))
    CHECK(w == doctest::Approx(100.0 * std::exp(0.0043)).epsilon(1e-12));
}

TEST_CASE("very volatile risky asset is barely held") {
  auto m = bond_stock(10.0);
  auto p = ClosedFormDsqParams::from_model(m, 138.33, 1.0, 100.0);
  const auto w = simulate_closed_form_dsq(p, m, 20000, 50, 4);
  const auto s = summarize(w);
  CHECK(s.mean == doctest::Approx(100.0 * std::exp(0.0043)).epsilon(1e-3));
}

TEST_CASE("simulated closed form matches the exact moments of the discrete control") {
  // With D = target - W the discrete amount-form update gives
  // D_{k+1} = D_k * c_k, c = e^{r dt} - M (Y - e^{r dt}), i.i.d. across steps.
  const auto m = bond_stock();
  const auto p = ClosedFormDsqParams::from_model(m, 138.33, 1.0, 100.0);
  const std::size_t steps = 48, n = 200000;
  const double dt = 1.0 / steps;
  const auto& a = m.assets[1];
  const double ey = std::exp(a.mu * dt);
  const double ey2 = std::exp((2.0 * a.mu + a.sigma * a.sigma + a.jump_intensity * p.kappa2_second) * dt);
  const double g = std::exp(p.r * dt);
  const double M = p.merton_ratio();
  const double ec = g - M * (ey - g);
  const double ec2 = g * g - 2.0 * g * M * (ey - g) + M * M * (ey2 - 2.0 * g * ey + g * g);
  const double d0 = 138.33 * std::exp(-p.r) - 100.0;
  const double mean_exact = 138.33 - d0 * std::pow(ec, steps);
  const double var_exact = d0 * d0 * (std::pow(ec2, steps) - std::pow(ec, 2.0 * steps));

  const auto w = simulate_closed_form_dsq(p, m, n, steps, 21);
  const auto s = summarize(w);
  const double se = std::sqrt(var_exact / n);
  CHECK(std::abs(s.mean - mean_exact) < 4.0 * se);
  CHECK(s.stdev == doctest::Approx(std::sqrt(var_exact)).epsilon(0.02));
}

TEST_CASE("embedding target") {
  CHECK(embedding_gamma(0.017, 300.0) == doctest::Approx(1.0 / 0.034 + 300.0));
  CHECK(embedding_gamma(0.5, 0.0) == 1.0);
  CHECK_THROWS_WITH_AS(embedding_gamma(0.0, 1.0), "invalid scalarization", ValidationError);
  CHECK_THROWS_WITH_AS(embedding_gamma(-1.0, 1.0), "invalid scalarization", ValidationError);
}

TEST_CASE("summary statistics") {
  std::vector<double> w(100);
  std::iota(w.begin(), w.end(), 1.0);
  std::reverse(w.begin(), w.end());
  const auto s = summarize(w);
  CHECK(s.mean == 50.5);
  CHECK(s.percentile(50) == doctest::Approx(50.5));
  CHECK(s.percentile(5) == doctest::Approx(5.95));
  CHECK(s.percentile(95) == doctest::Approx(95.05));
  CHECK(s.stdev == doctest::Approx(std::sqrt((100.0 * 100.0 - 1.0) / 12.0)));
  CHECK_THROWS_AS(s.percentile(10), ValidationError);

  const auto c = summarize(std::vector<double>(17, 3.5));
  CHECK(c.stdev == 0.0);
  CHECK(c.mean == 3.5);
  for (double q : c.percentiles) CHECK(q == 3.5);
  CHECK_THROWS_AS(summarize(std::vector<double>{}), ValidationError);
}

TEST_CASE("summary properties on random samples") {
  auto rng = Xoshiro256::stream(1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 500);
    std::vector<double> w(n);
    for (auto& x : w) x = std::exp(2.0 * rng.uniform());
    const auto s = summarize(w);
    CHECK(s.percentile(50) == doctest::Approx(oracle::sorted_median(w)).epsilon(1e-14));
    for (std::size_t i = 1; i < s.percentiles.size(); ++i) CHECK(s.percentiles[i] >= s.percentiles[i - 1]);
    CHECK(s.percentiles.front() >= *std::min_element(w.begin(), w.end()));
    CHECK(s.percentiles.back() <= *std::max_element(w.begin(), w.end()));
    // Permutation invariance.
    auto shuffled = w;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto t = summarize(shuffled);
    CHECK(t.percentiles == s.percentiles);
    CHECK(t.stdev == doctest::Approx(s.stdev).epsilon(1e-12));
    // Shift equivariance.
    for (auto& x : shuffled) x += 10.0;
    const auto u = summarize(shuffled);
    CHECK(u.mean == doctest::Approx(s.mean + 10.0).epsilon(1e-12));
    CHECK(u.percentile(25) == doctest::Approx(s.percentile(25) + 10.0).epsilon(1e-12));
  }
}
