#pragma once

// Mini-batch SGD on (theta, xi) with Adam and tail iterate averaging.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dynalloc/market_data.hpp"
#include "dynalloc/objectives.hpp"
#include "dynalloc/policy_net.hpp"
#include "dynalloc/wealth_sim.hpp"

namespace dynalloc {

struct AdamConfig {
  double step_size = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

struct TrainConfig {
  std::size_t max_steps = 20000;
  std::size_t batch_size = 1000;
  AdamConfig adam;
  double tail_average_start_fraction = 0.8;
  std::uint64_t seed = 1;
  std::size_t log_every = 100;
  /// Gradient-norm clipping threshold; 0 disables.
  double grad_clip = 1e3;

  void validate(std::size_t n_paths) const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;  ///< number of updates applied

  explicit AdamState(std::size_t dim = 0) : m(dim, 0.0), v(dim, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place. `step_index` is the
/// 1-based update count.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               std::size_t step_index, const AdamConfig& cfg);

struct TrainLogEntry {
  std::size_t step = 0;
  double batch_objective = 0.0;
  double grad_norm = 0.0;
};

/// Per-step view handed to an optional observer (tests, progress output).
/// `params` is theta followed, for MCV, by the xi coordinate in units of w0.
struct StepInfo {
  std::size_t step = 0;
  double batch_objective = 0.0;
  double grad_norm = 0.0;
  std::span<const double> params;
};

using StepObserver = std::function<void(const StepInfo&)>;

struct TrainedPolicy {
  PolicyNetwork net;  ///< tail-averaged parameters
  std::optional<double> xi_star;
  std::vector<TrainLogEntry> history;
  ObjectiveValue final_full_objective;  ///< on the full path set
  AdamState adam;
  std::vector<double> last_params;      ///< final raw iterate
  std::size_t averaged_iterates = 0;
};

/// Minimizes the sample-average objective over the full path set by
/// mini-batch Adam. Deterministic in (inputs, cfg). Throws
/// NumericalError("training diverged at step k") on a non-finite objective.
TrainedPolicy train(const PolicyNetwork& net0, const InvestmentHorizon& horizon,
                    const ReturnPathSet& paths, const ObjectiveSpec& spec,
                    const TrainConfig& cfg, const StepObserver& observer = {});

/// Objective and its gradient over (theta, xi) for a batch of paths, as used
/// by one training step. The xi entry (MCV only) is w.r.t. xi itself.
struct BatchGradient {
  ObjectiveValue objective;
  std::vector<double> d_theta;
  double d_xi = 0.0;
};

BatchGradient batch_gradient(const PolicyNetwork& net, const InvestmentHorizon& horizon,
                             const ReturnPathSet& paths, std::span<const std::size_t> indices,
                             const ObjectiveSpec& spec, double xi);

/// Splits [0, n) into ceil(n / batch) nearly equal consecutive chunks.
std::vector<std::pair<std::size_t, std::size_t>> epoch_batches(std::size_t n, std::size_t batch);

}  // namespace dynalloc
