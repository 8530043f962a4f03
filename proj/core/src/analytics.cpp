#include "dynalloc/analytics.hpp"

#include <algorithm>
#include <cmath>

#include "dynalloc/error.hpp"
#include "dynalloc/parallel.hpp"
#include "dynalloc/random.hpp"

namespace dynalloc {

void ClosedFormDsqParams::validate() const {
  if (!(sigma2 * sigma2 + lambda2 * kappa2_second > 0.0))
    throw ValidationError("closed form: sigma2^2 + lambda2 * kappa2 must be > 0");
  if (!(T > 0.0)) throw ValidationError("closed form: T must be > 0");
  if (!(gamma > 0.0)) throw ValidationError("closed form: gamma must be > 0");
}

ClosedFormDsqParams ClosedFormDsqParams::from_model(const MarketModel& model, double gamma,
                                                    double T, double w0) {
  model.validate();
  if (model.n_assets() != 2 || model.risk_free.size() != 2 ||
      model.risk_free[0] == model.risk_free[1])
    throw ValidationError("closed form needs one risk-free and one risky asset");
  const std::size_t safe = model.risk_free[0] ? 0 : 1;
  const auto& risky = model.assets[1 - safe];
  ClosedFormDsqParams p;
  p.r = model.assets[safe].mu;
  p.mu2 = risky.mu;
  p.sigma2 = risky.sigma;
  p.lambda2 = risky.jump_intensity;
  p.kappa2_second = risky.jump_intensity > 0.0 ? kou_jump_moments(risky).kappa2 : 0.0;
  p.gamma = gamma;
  p.T = T;
  p.w0 = w0;
  return p;
}

double dsq_closed_form_weight(const ClosedFormDsqParams& p, double t, double wealth) {
  if (!(wealth > 0.0)) throw ValidationError("insolvent state outside closed-form domain");
  const double target = p.gamma * std::exp(-p.r * (p.T - t));
  return p.merton_ratio() * (target - wealth) / wealth;
}

std::vector<double> simulate_closed_form_dsq(const ClosedFormDsqParams& p,
                                             const MarketModel& model, std::size_t n_paths,
                                             std::size_t n_steps, std::uint64_t seed) {
  p.validate();
  model.validate();
  if (model.n_assets() != 2 || model.risk_free.size() != 2 ||
      model.risk_free[0] == model.risk_free[1])
    throw ValidationError("closed form needs one risk-free and one risky asset");
  if (n_steps < 1) throw ValidationError("closed form: n_steps must be >= 1");
  const std::size_t risky = model.risk_free[0] ? 1 : 0;
  const double dt = p.T / static_cast<double>(n_steps);
  const double m = p.merton_ratio();
  const double safe_growth = std::exp(p.r * dt);

  std::vector<double> out(n_paths);
  const PeriodReturnSampler prototype(model, dt);
  for_each_shard(n_paths, 1024, [&](std::size_t, std::size_t begin, std::size_t end) {
    PeriodReturnSampler sampler = prototype;
    double y[2];
    for (std::size_t j = begin; j < end; ++j) {
      auto rng = Xoshiro256::stream(seed, j);
      sampler.reset();
      double wealth = p.w0;
      for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double target = p.gamma * std::exp(-p.r * (p.T - t));
        sampler.sample(rng, y);
        const double amount = m * (target - wealth);
        wealth = wealth * safe_growth + amount * (y[risky] - safe_growth);
      }
      out[j] = wealth;
    }
  });
  return out;
}

double embedding_gamma(double rho, double mean_terminal_wealth) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ValidationError("invalid scalarization");
  return 1.0 / (2.0 * rho) + mean_terminal_wealth;
}

double DistributionSummary::percentile(int probe) const {
  for (std::size_t i = 0; i < kSummaryPercentiles.size(); ++i) {
    if (kSummaryPercentiles[i] == probe) return percentiles[i];
  }
  throw ValidationError("unknown percentile probe " + std::to_string(probe));
}

double percentile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("no paths");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DistributionSummary summarize(std::span<const double> w) {
  if (w.empty()) throw ValidationError("no paths");
  DistributionSummary s;
  const double n = static_cast<double>(w.size());
  double sum = 0.0;
  for (double x : w) sum += x;
  s.mean = sum / n;
  double ss = 0.0;
  for (double x : w) ss += (x - s.mean) * (x - s.mean);
  s.stdev = std::sqrt(ss / n);
  std::vector<double> sorted(w.begin(), w.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < kSummaryPercentiles.size(); ++i)
    s.percentiles[i] = percentile_linear(sorted, kSummaryPercentiles[i] / 100.0);
  // Interpolation round-off can break ties by an ulp.
  for (std::size_t i = 1; i < s.percentiles.size(); ++i)
    s.percentiles[i] = std::max(s.percentiles[i], s.percentiles[i - 1]);
  if (sorted.front() == sorted.back()) {
    s.stdev = 0.0;
    s.mean = sorted.front();
  }
  return s;
}

}  // namespace dynalloc
