#include "dynalloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dynalloc/error.hpp"
#include "dynalloc/random.hpp"

namespace dynalloc {

void TrainConfig::validate(std::size_t n_paths) const {
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (batch_size > n_paths) throw ValidationError("train: batch_size exceeds the number of paths");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ValidationError("train: beta1 must lie in [0,1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ValidationError("train: beta2 must lie in [0,1)");
  if (!(adam.step_size > 0.0)) throw ValidationError("train: step_size must be > 0");
  if (!(adam.eps_hat > 0.0)) throw ValidationError("train: eps_hat must be > 0");
  if (!(tail_average_start_fraction >= 0.0 && tail_average_start_fraction < 1.0))
    throw ValidationError("train: tail_average_start_fraction must lie in [0,1)");
  if (!(grad_clip >= 0.0)) throw ValidationError("train: grad_clip must be >= 0");
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               std::size_t step_index, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size() ||
      grad.size() != params.size())
    throw ValidationError("adam: state dimensions do not match the gradient");
  const double t = static_cast<double>(step_index);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.step_size * m_hat / (std::sqrt(v_hat) + cfg.eps_hat);
  }
  state.step = step_index;
}

std::vector<std::pair<std::size_t, std::size_t>> epoch_batches(std::size_t n, std::size_t batch) {
  const std::size_t k = (n + batch - 1) / batch;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(k);
  for (std::size_t b = 0; b < k; ++b) out.emplace_back(b * n / k, (b + 1) * n / k);
  return out;
}

BatchGradient batch_gradient(const PolicyNetwork& net, const InvestmentHorizon& horizon,
                             const ReturnPathSet& paths, std::span<const std::size_t> indices,
                             const ObjectiveSpec& spec, double xi) {
  const auto batch = roll_forward(net, horizon, paths, indices, true);
  BatchGradient out;
  out.objective = evaluate(spec, batch.terminal_wealth, xi);
  if (!std::isfinite(out.objective.value)) {
    out.d_theta.assign(net.parameter_count(), 0.0);
    return out;
  }
  const auto cot = cotangents(spec, batch.terminal_wealth, xi);
  out.d_theta = backprop_through_time(net, batch, cot.d_terminal).d_theta;
  out.d_xi = cot.d_xi;
  return out;
}

TrainedPolicy train(const PolicyNetwork& net0, const InvestmentHorizon& horizon,
                    const ReturnPathSet& paths, const ObjectiveSpec& spec,
                    const TrainConfig& cfg, const StepObserver& observer) {
  horizon.validate();
  spec.validate();
  cfg.validate(paths.n_paths());
  if (paths.n_periods() != horizon.n_rebalance)
    throw ValidationError("path set has a different number of periods than the horizon");

  const bool with_xi = spec.has_xi();
  // xi is optimized in units of w0 so one Adam step size suits both blocks.
  const double xi_unit = horizon.w0;
  PolicyNetwork net = net0;
  const std::size_t n_theta = net.parameter_count();
  const std::size_t dim = n_theta + (with_xi ? 1 : 0);

  std::vector<double> params(dim);
  std::copy(net.theta().begin(), net.theta().end(), params.begin());
  if (with_xi) params[n_theta] = 1.0;  // xi starts at w0

  AdamState adam(dim);
  std::vector<double> avg(dim, 0.0);
  std::size_t averaged = 0;
  const auto average_from =
      static_cast<std::size_t>(std::floor(cfg.tail_average_start_fraction * static_cast<double>(cfg.max_steps)));

  std::vector<std::size_t> perm(paths.n_paths());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const auto batches = epoch_batches(paths.n_paths(), cfg.batch_size);
  auto rng = Xoshiro256::stream(cfg.seed, 0x5eed);
  std::size_t batch_pos = 0;

  TrainedPolicy result;
  std::vector<double> grad(dim);

  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    if (batch_pos == 0) std::shuffle(perm.begin(), perm.end(), rng);
    const auto [lo, hi] = batches[batch_pos];
    batch_pos = (batch_pos + 1) % batches.size();
    const std::span<const std::size_t> indices(perm.data() + lo, hi - lo);

    std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n_theta), net.theta().begin());
    const double xi = with_xi ? params[n_theta] * xi_unit : 0.0;
    const auto bg = batch_gradient(net, horizon, paths, indices, spec, xi);
    if (!std::isfinite(bg.objective.value))
      throw NumericalError("training diverged at step " + std::to_string(step));

    std::copy(bg.d_theta.begin(), bg.d_theta.end(), grad.begin());
    if (with_xi) grad[n_theta] = bg.d_xi * xi_unit;
    double norm_sq = 0.0;
    for (double g : grad) norm_sq += g * g;
    const double norm = std::sqrt(norm_sq);
    if (!std::isfinite(norm)) throw NumericalError("training diverged at step " + std::to_string(step));
    if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
      const double s = cfg.grad_clip / norm;
      for (double& g : grad) g *= s;
    }

    adam_step(adam, params, grad, step + 1, cfg.adam);

    if (step >= average_from) {
      // Running mean; a constant iterate sequence averages to itself exactly.
      ++averaged;
      const double inv = 1.0 / static_cast<double>(averaged);
      for (std::size_t i = 0; i < dim; ++i) avg[i] += (params[i] - avg[i]) * inv;
    }
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.max_steps))
      result.history.push_back({step, bg.objective.value, norm});
    if (observer) observer(StepInfo{step, bg.objective.value, norm, params});
  }

  result.last_params = params;
  const std::vector<double>& final_params = averaged > 0 ? avg : params;
  result.averaged_iterates = averaged;
  std::copy(final_params.begin(), final_params.begin() + static_cast<std::ptrdiff_t>(n_theta),
            net.theta().begin());
  if (with_xi) result.xi_star = final_params[n_theta] * xi_unit;

  const auto w = terminal_wealth(net, horizon, paths);
  result.final_full_objective = evaluate(spec, w, result.xi_star.value_or(0.0));
  if (!std::isfinite(result.final_full_objective.value))
    throw NumericalError("training diverged at step " + std::to_string(cfg.max_steps));
  result.net = std::move(net);
  result.adam = std::move(adam);
  return result;
}

}  // namespace dynalloc
