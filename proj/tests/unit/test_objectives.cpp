#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dynalloc/error.hpp"
#include "dynalloc/objectives.hpp"
#include "dynalloc/random.hpp"
#include "support/oracles.hpp"

using namespace dynalloc;

namespace {

std::vector<double> lognormal_sample(std::size_t n, std::uint64_t seed, double scale = 100.0) {
  auto rng = Xoshiro256::stream(seed, 2);
  std::normal_distribution<double> z;
  std::vector<double> w(n);
  for (auto& x : w) x = scale * std::exp(0.05 + 0.2 * z(rng));
  return w;
}

double population_variance(const std::vector<double>& w) {
  double m = 0.0;
  for (double x : w) m += x;
  m /= static_cast<double>(w.size());
  double v = 0.0;
  for (double x : w) v += (x - m) * (x - m);
  return v / static_cast<double>(w.size());
}

}  // namespace

TEST_CASE("worked values") {
  const std::vector<double> two{90.0, 110.0};
  CHECK(evaluate(ObjectiveSpec::dsq(100.0), std::vector<double>{100.0, 100.0}).value == 0.0);
  CHECK(evaluate(ObjectiveSpec::dsq(100.0), two).value == doctest::Approx(100.0));
  CHECK(evaluate(ObjectiveSpec::mv(0.01), two).value == doctest::Approx(-99.0));
  CHECK(evaluate(ObjectiveSpec::msemiv(0.01), two).value == doctest::Approx(-99.5));
  CHECK(evaluate(ObjectiveSpec::osq(100.0, 1e-6), two).value == doctest::Approx(50.0 - 1e-4));
  const auto mcv = evaluate(ObjectiveSpec::mcv(1.0, 0.5, 0.0), two, 95.0);
  CHECK(mcv.value == doctest::Approx(-190.0));
  CHECK(mcv.xi == 95.0);
  CHECK(evaluate(ObjectiveSpec::mv(0.01), two).mean_wealth == 100.0);
}

TEST_CASE("smooth max agrees with max outside the band and errs by lambda/4 at most") {
  const double lam = 0.3;
  CHECK(smooth_max(1.0, lam) == 1.0);
  CHECK(smooth_max(-1.0, lam) == 0.0);
  CHECK(smooth_max(0.0, lam) == doctest::Approx(lam / 4.0));
  double worst = 0.0;
  for (int k = -2000; k <= 2000; ++k) {
    const double x = lam * k / 1000.0;
    worst = std::max(worst, smooth_max(x, lam) - std::max(x, 0.0));
    CHECK_UNARY(smooth_max(x, lam) >= std::max(x, 0.0));
  }
  CHECK(worst == doctest::Approx(lam / 4.0).epsilon(1e-12));
  // C1 at the band edges.
  CHECK(smooth_max(lam, lam) == doctest::Approx(lam));
  CHECK(smooth_max(-lam, lam) == doctest::Approx(0.0).scale(1.0));
  CHECK(smooth_max_derivative(lam, lam) == doctest::Approx(1.0));
  CHECK(smooth_max_derivative(-lam, lam) == doctest::Approx(0.0).scale(1.0));
  for (double x : {-0.2, -0.05, 0.0, 0.11, 0.29}) {
    const double fd = (smooth_max(x + 1e-7, lam) - smooth_max(x - 1e-7, lam)) / 2e-7;
    CHECK(smooth_max_derivative(x, lam) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("cotangents match central differences for every objective") {
  const auto w0 = lognormal_sample(64, 1);
  const double med = oracle::sorted_median(w0);
  const ObjectiveSpec specs[] = {ObjectiveSpec::dsq(120.0), ObjectiveSpec::osq(110.0, 1e-3),
                                 ObjectiveSpec::mv(0.02), ObjectiveSpec::msemiv(0.05),
                                 ObjectiveSpec::mcv(0.7, 0.1, 0.5)};
  for (const auto& spec : specs) {
    CAPTURE(to_string(spec.kind));
    const double xi = med;
    const auto ct = cotangents(spec, w0, xi);
    auto f = [&](const std::vector<double>& w) { return evaluate(spec, w, xi).value; };
    std::vector<double> fd(w0.size());
    for (std::size_t j = 0; j < w0.size(); ++j) fd[j] = oracle::central_difference(f, w0, j, 1e-5);
    CHECK(oracle::normwise_relative_error(ct.d_terminal, fd) <= 1e-6);
    if (spec.has_xi()) {
      auto g = [&](const std::vector<double>& x) { return evaluate(spec, w0, x[0]).value; };
      CHECK(ct.d_xi == doctest::Approx(oracle::central_difference(g, {xi}, 0, 1e-5)).epsilon(1e-6));
    }
  }
}

TEST_CASE("MV and semivariance cotangents sum to -1 (risk term is shift invariant)") {
  const auto w = lognormal_sample(200, 3);
  for (const auto& spec : {ObjectiveSpec::mv(0.05), ObjectiveSpec::msemiv(0.05)}) {
    const auto ct = cotangents(spec, w);
    double s = 0.0;
    for (double d : ct.d_terminal) s += d;
    CHECK(s == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("MV decomposes into mean and population variance") {
  const auto w = lognormal_sample(1000, 4);
  const double rho = 0.013;
  const auto v = evaluate(ObjectiveSpec::mv(rho), w);
  CHECK(v.value == doctest::Approx(-(v.mean_wealth - rho * population_variance(w))).epsilon(1e-13));
}

TEST_CASE("semivariance never exceeds variance") {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const auto w = lognormal_sample(300, s);
    const double rho = 0.01;
    const auto mv = evaluate(ObjectiveSpec::mv(rho), w);
    const auto msv = evaluate(ObjectiveSpec::msemiv(rho), w);
    CHECK_UNARY(msv.value <= mv.value + 1e-12);
  }
}

TEST_CASE("MCV is convex in xi") {
  const auto w = lognormal_sample(500, 5);
  const auto spec = ObjectiveSpec::mcv(1.0, 0.05, 1e-3);
  double prev_slope = -INFINITY;
  for (double xi = 40.0; xi <= 200.0; xi += 0.5) {
    const double slope = cotangents(spec, w, xi).d_xi;
    CHECK_UNARY(slope >= prev_slope - 1e-12);
    prev_slope = slope;
    const double mid = evaluate(spec, w, xi).value;
    const double l = evaluate(spec, w, xi - 0.5).value;
    const double r = evaluate(spec, w, xi + 0.5).value;
    CHECK_UNARY(mid <= 0.5 * (l + r) + 1e-12);
  }
}

TEST_CASE("MCV minimum over xi recovers rho * mean + CVaR") {
  const auto w = lognormal_sample(1000, 6);
  const auto spec = ObjectiveSpec::mcv(0.5, 0.05, 0.0);
  std::vector<double> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  double best = INFINITY;
  for (double xi : sorted) best = std::min(best, evaluate(spec, w, xi).value);
  const auto mean = evaluate(spec, w, 0.0).mean_wealth;
  const auto cv = empirical_cvar(w, 0.05);
  CHECK(-best == doctest::Approx(0.5 * mean + cv.cvar).epsilon(1e-12));
}

TEST_CASE("empirical CVaR uses the ceil(alpha n) smallest outcomes") {
  std::vector<double> w(100);
  for (int i = 0; i < 100; ++i) w[i] = 100.0 - i;
  CHECK(empirical_cvar(w, 0.05).cvar == doctest::Approx(3.0));
  CHECK(empirical_cvar(w, 0.05).var == 5.0);
  CHECK(empirical_cvar(w, 0.10).cvar == doctest::Approx(5.5));
  CHECK(empirical_cvar(w, 0.001).cvar == 1.0);
  CHECK(empirical_cvar(std::vector<double>(37, 4.25), 0.05).cvar == 4.25);
  CHECK(tail_count(10000, 0.01) == 100);
  CHECK(tail_count(10000, 0.05) == 500);
  CHECK(tail_count(7, 0.05) == 1);
  CHECK(tail_count(101, 0.05) == 6);
  const auto big = lognormal_sample(777, 8);
  CHECK(empirical_cvar(big, 0.05).cvar == doctest::Approx(oracle::sorted_tail_mean(big, 39)).epsilon(1e-14));
}

TEST_CASE("empty samples and bad parameters") {
  const std::vector<double> none;
  CHECK_THROWS_WITH_AS(evaluate(ObjectiveSpec::dsq(1.0), none), "no paths", ValidationError);
  CHECK_THROWS_WITH_AS(cotangents(ObjectiveSpec::mv(1.0), none), "no paths", ValidationError);
  CHECK_THROWS_AS(empirical_cvar(std::vector<double>{1.0}, 1.5), ValidationError);
  CHECK_THROWS_AS(ObjectiveSpec::mv(0.0).validate(), ValidationError);
  CHECK_THROWS_AS(ObjectiveSpec::dsq(-1.0).validate(), ValidationError);
  CHECK_THROWS_AS(ObjectiveSpec::mcv(1.0, 0.0).validate(), ValidationError);
  CHECK_THROWS_AS(parse_objective_kind("CARA"), ValidationError);
  CHECK(parse_objective_kind("MSemiV") == ObjectiveKind::MSemiV);
  for (auto k : {ObjectiveKind::DSQ, ObjectiveKind::OSQ, ObjectiveKind::MV, ObjectiveKind::MCV, ObjectiveKind::MSemiV})
    CHECK(parse_objective_kind(to_string(k)) == k);
}
