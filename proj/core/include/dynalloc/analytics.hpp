#pragma once

// Reference solutions and reporting: the continuous-time DSQ control with a
// risk-free and a jump-diffusion asset, the MV/DSQ embedding target, and the
// percentile summaries used in reports.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dynalloc/market_data.hpp"

namespace dynalloc {

struct ClosedFormDsqParams {
  double r = 0.0;              ///< risk-free rate
  double mu2 = 0.0;            ///< risky drift
  double sigma2 = 0.0;         ///< risky diffusive vol
  double lambda2 = 0.0;        ///< risky jump intensity
  double kappa2_second = 0.0;  ///< E[(theta - 1)^2] of the risky jump
  double gamma = 0.0;
  double T = 1.0;
  double w0 = 100.0;

  double merton_ratio() const noexcept {
    return (mu2 - r) / (sigma2 * sigma2 + lambda2 * kappa2_second);
  }
  void validate() const;

  /// Reads r from the risk-free asset and the rest from the risky one.
  static ClosedFormDsqParams from_model(const MarketModel& model, double gamma, double T,
                                        double w0);
};

/// Fraction of wealth in the risky asset; the risk-free asset holds the
/// remainder. Unclipped.
double dsq_closed_form_weight(const ClosedFormDsqParams& p, double t, double wealth);

/// Applies the unconstrained control at n_steps uniform times along freshly
/// simulated returns (dt = T / n_steps). Wealth may go negative; the control
/// is applied in amount form M * (gamma e^{-r(T-t)} - W). Path j uses stream
/// (seed, j).
std::vector<double> simulate_closed_form_dsq(const ClosedFormDsqParams& p,
                                             const MarketModel& model, std::size_t n_paths,
                                             std::size_t n_steps, std::uint64_t seed);

/// gamma = 1 / (2 rho) + mean terminal wealth of the MV optimum.
double embedding_gamma(double rho, double mean_terminal_wealth);

inline constexpr std::array<int, 7> kSummaryPercentiles{5, 20, 25, 50, 75, 80, 95};

struct DistributionSummary {
  double mean = 0.0;
  double stdev = 0.0;  ///< population
  std::array<double, kSummaryPercentiles.size()> percentiles{};

  /// Percentile by probe value (5, 20, ...). Throws for unknown probes.
  double percentile(int probe) const;
};

/// Linear interpolation between order statistics at h = (n - 1) q.
double percentile_linear(std::span<const double> sorted, double q);

DistributionSummary summarize(std::span<const double> terminal_wealth);

}  // namespace dynalloc
