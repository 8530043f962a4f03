#pragma once

// Controlled wealth recursion along return paths:
//   W(t_m+) = W(t_m-) + q_m
//   p_m     = f(t_m, W(t_m+); theta)
//   W(t_{m+1}-) = W(t_m+) * <p_m, Y(t_m)>
// with terminal wealth W(T) = W(t_{N_rb}-). No contribution at maturity.

#include <cstddef>
#include <span>
#include <vector>

#include "dynalloc/market_data.hpp"
#include "dynalloc/policy_net.hpp"

namespace dynalloc {

struct InvestmentHorizon {
  double T = 1.0;
  std::size_t n_rebalance = 4;
  double w0 = 100.0;
  /// Cash injected at each rebalancing time (length n_rebalance). Empty
  /// means no contributions.
  std::vector<double> contributions;

  double dt() const noexcept { return T / static_cast<double>(n_rebalance); }
  double time(std::size_t m) const noexcept { return static_cast<double>(m) * dt(); }
  double contribution(std::size_t m) const noexcept {
    return contributions.empty() ? 0.0 : contributions[m];
  }
  void validate() const;
};

struct WealthTrajectoryBatch {
  std::size_t n_paths = 0;
  std::size_t n_periods = 0;
  std::size_t n_assets = 0;
  std::size_t record_size = 0;
  std::vector<double> terminal_wealth;
  bool retained = false;
  // Per (path, step) records, only when retained.
  std::vector<double> wealth_plus;  ///< W(t_m+), [path][step]
  std::vector<double> records;      ///< activation records, [path][step][record]
  std::vector<double> returns;      ///< Y(t_m), [path][step][asset]

  std::span<const double> weights(std::size_t path, std::size_t step) const noexcept {
    const double* rec = records.data() + (path * n_periods + step) * record_size;
    return {rec + record_size - n_assets, n_assets};
  }
};

/// Rolls the wealth recursion forward for the selected paths. With
/// `retain` the per-step records needed by backprop_through_time are kept.
WealthTrajectoryBatch roll_forward(const PolicyNetwork& net, const InvestmentHorizon& horizon,
                                   const ReturnPathSet& paths,
                                   std::span<const std::size_t> path_indices,
                                   bool retain = true);

/// Terminal wealth only, for every path of the set (no records).
std::vector<double> terminal_wealth(const PolicyNetwork& net, const InvestmentHorizon& horizon,
                                    const ReturnPathSet& paths);

/// Reverse sweep: returns sum_j d_terminal[j] * dW_j(T)/dtheta.
Gradient backprop_through_time(const PolicyNetwork& net, const WealthTrajectoryBatch& batch,
                               std::span<const double> d_terminal);

}  // namespace dynalloc
