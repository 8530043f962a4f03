#include "dynalloc/wealth_sim.hpp"

#include <cmath>

#include "dynalloc/error.hpp"
#include "dynalloc/parallel.hpp"

namespace dynalloc {

namespace {
constexpr std::size_t kForwardShard = 256;
constexpr std::size_t kBackwardShard = 64;
}  // namespace

void InvestmentHorizon::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("horizon: T must be > 0");
  if (n_rebalance < 1) throw ValidationError("horizon: N_rb must be >= 1");
  if (!(w0 > 0.0) || !std::isfinite(w0)) throw ValidationError("horizon: w0 must be > 0");
  if (!contributions.empty()) {
    if (contributions.size() != n_rebalance)
      throw ValidationError("horizon: contributions must have N_rb entries");
    for (double q : contributions) {
      if (!(q >= 0.0) || !std::isfinite(q))
        throw ValidationError("horizon: contributions must be finite and >= 0");
    }
  }
}

WealthTrajectoryBatch roll_forward(const PolicyNetwork& net, const InvestmentHorizon& horizon,
                                   const ReturnPathSet& paths,
                                   std::span<const std::size_t> path_indices, bool retain) {
  horizon.validate();
  if (paths.n_periods() != horizon.n_rebalance)
    throw ValidationError("path set has a different number of periods than the horizon");
  if (paths.n_assets() != net.topology().n_assets)
    throw ValidationError("path set asset count does not match the network");
  if (net.topology().n_features != 2)
    throw ValidationError("wealth simulation requires the (t, W) feature form");
  for (std::size_t idx : path_indices) {
    if (idx >= paths.n_paths()) throw ValidationError("path index out of range");
  }

  WealthTrajectoryBatch batch;
  batch.n_paths = path_indices.size();
  batch.n_periods = horizon.n_rebalance;
  batch.n_assets = paths.n_assets();
  batch.record_size = net.activation_size();
  batch.retained = retain;
  batch.terminal_wealth.assign(batch.n_paths, 0.0);
  const std::size_t steps = batch.n_periods;
  const std::size_t na = batch.n_assets;
  const std::size_t rs = batch.record_size;
  if (retain) {
    batch.wealth_plus.assign(batch.n_paths * steps, 0.0);
    batch.records.assign(batch.n_paths * steps * rs, 0.0);
    batch.returns.assign(batch.n_paths * steps * na, 0.0);
  }

  for_each_shard(batch.n_paths, kForwardShard, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> local(rs);
    for (std::size_t b = begin; b < end; ++b) {
      const std::size_t j = path_indices[b];
      double wealth = horizon.w0;
      for (std::size_t m = 0; m < steps; ++m) {
        const double w_plus = wealth + horizon.contribution(m);
        std::span<double> rec =
            retain ? std::span<double>(batch.records.data() + (b * steps + m) * rs, rs)
                   : std::span<double>(local);
        net.forward_into(horizon.time(m), w_plus, rec);
        const auto y = paths.returns(j, m);
        const double* p = rec.data() + rs - na;
        double growth = 0.0;
        for (std::size_t i = 0; i < na; ++i) growth += p[i] * y[i];
        if (retain) {
          batch.wealth_plus[b * steps + m] = w_plus;
          std::copy(y.begin(), y.end(), batch.returns.begin() + static_cast<std::ptrdiff_t>((b * steps + m) * na));
        }
        wealth = w_plus * growth;
      }
      batch.terminal_wealth[b] = wealth;
    }
  });
  return batch;
}

std::vector<double> terminal_wealth(const PolicyNetwork& net, const InvestmentHorizon& horizon,
                                    const ReturnPathSet& paths) {
  std::vector<std::size_t> all(paths.n_paths());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  return roll_forward(net, horizon, paths, all, false).terminal_wealth;
}

Gradient backprop_through_time(const PolicyNetwork& net, const WealthTrajectoryBatch& batch,
                               std::span<const double> d_terminal) {
  if (!batch.retained || batch.records.size() != batch.n_paths * batch.n_periods * batch.record_size)
    throw ValidationError("forward pass not retained");
  if (batch.record_size != net.activation_size() || batch.n_assets != net.topology().n_assets)
    throw ValidationError("stale cache");
  if (d_terminal.size() != batch.n_paths)
    throw ValidationError("terminal cotangents must align with the batch");

  const std::size_t np = net.parameter_count();
  const std::size_t steps = batch.n_periods;
  const std::size_t na = batch.n_assets;
  const std::size_t rs = batch.record_size;
  const std::size_t shards = (batch.n_paths + kBackwardShard - 1) / kBackwardShard;
  std::vector<std::vector<double>> partial(std::max<std::size_t>(shards, 1),
                                           std::vector<double>(np, 0.0));

  for_each_shard(batch.n_paths, kBackwardShard, [&](std::size_t s, std::size_t begin, std::size_t end) {
    auto& grad = partial[s];
    std::vector<double> scratch(net.scratch_size());
    std::vector<double> d_p(na);
    for (std::size_t b = begin; b < end; ++b) {
      double lambda = d_terminal[b];  // adjoint of W(t_{m+1}-)
      if (lambda == 0.0) continue;
      for (std::size_t m = steps; m-- > 0;) {
        const double* rec = batch.records.data() + (b * steps + m) * rs;
        const double* y = batch.returns.data() + (b * steps + m) * na;
        const double* p = rec + rs - na;
        const double w_plus = batch.wealth_plus[b * steps + m];
        double growth = 0.0;
        for (std::size_t i = 0; i < na; ++i) {
          growth += p[i] * y[i];
          d_p[i] = w_plus * y[i] * lambda;
        }
        const double d_wealth = net.backward_into({rec, rs}, d_p, grad, scratch);
        lambda = growth * lambda + d_wealth;  // contribution shift has unit Jacobian
      }
    }
  });

  Gradient out;
  pairwise_sum_into(partial, out.d_theta);
  return out;
}

}  // namespace dynalloc
