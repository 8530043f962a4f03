#pragma once

/**
 * @file policy_net.hpp
 * @brief Fully-connected feedforward control network mapping the feature
 * vector (t, W) to long-only, fully-invested portfolio weights.
 *
 * Hidden layers use the logistic sigmoid, the output layer a softmax, so
 * every output lies in the probability simplex. One parameter vector is
 * shared across all rebalancing times; time enters only as a feature.
 *
 * Parameter layout (canonical, used by serialization): for each layer in
 * order (hidden 1..L, then output) the weight matrix [fan_out x fan_in]
 * row-major followed by the bias vector [fan_out].
 *
 * Activation record layout: scaled features, then each hidden layer's
 * post-activations, then the output weights.
 */

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dynalloc {

struct NetTopology {
  std::size_t n_features = 2;  ///< (t, W) in the minimal form
  std::size_t hidden_layers = 1;
  std::size_t hidden_width = 3;
  std::size_t n_assets = 2;

  void validate() const;
  std::size_t parameter_count() const noexcept;
  std::size_t activation_size() const noexcept;
  std::size_t max_width() const noexcept;

  bool operator==(const NetTopology&) const = default;
};

/// Affine map applied to the raw features before the first layer:
/// x_k = (phi_k - offset_k) * scale_k.
struct FeatureScaling {
  std::vector<double> offset;
  std::vector<double> scale;

  /// t -> t / T, W -> W / w0.
  static FeatureScaling for_horizon(double horizon_years, double w0);
  static FeatureScaling identity(std::size_t n_features);
};

/// Reverse-mode gradient carrier aligned with the theta layout.
struct Gradient {
  std::vector<double> d_theta;
};

class ActivationRecord {
 public:
  ActivationRecord() = default;
  ActivationRecord(const NetTopology& topology, std::vector<double> values)
      : topology_(topology), values_(std::move(values)) {}

  const NetTopology& topology() const noexcept { return topology_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> weights() const noexcept {
    return std::span<const double>(values_).last(topology_.n_assets);
  }

 private:
  NetTopology topology_;
  std::vector<double> values_;
};

struct ForwardResult {
  std::vector<double> weights;
  ActivationRecord cache;
};

struct BackwardResult {
  Gradient d_theta;
  double d_wealth = 0.0;
};

class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  /// theta defaults to zeros when empty.
  explicit PolicyNetwork(const NetTopology& topology, FeatureScaling scaling = {},
                         std::vector<double> theta = {});

  const NetTopology& topology() const noexcept { return topology_; }
  const FeatureScaling& scaling() const noexcept { return scaling_; }
  std::span<const double> theta() const noexcept { return theta_; }
  std::span<double> theta() noexcept { return theta_; }
  std::size_t parameter_count() const noexcept { return theta_.size(); }
  std::size_t activation_size() const noexcept { return topology_.activation_size(); }
  std::size_t scratch_size() const noexcept { return 2 * topology_.max_width(); }

  /// Convenience forward pass on (t, W). Throws ValidationError("invalid
  /// feature") on non-finite input.
  ForwardResult forward(double t, double wealth) const;

  /// Gradient of d_weights . weights w.r.t. theta and the wealth feature.
  /// Throws ValidationError("stale cache") if the record does not match.
  BackwardResult backward(const ActivationRecord& cache,
                          std::span<const double> d_weights) const;

  // Allocation-free variants used by the wealth simulator. `record` must hold
  // activation_size() values; weights are its last n_assets entries.
  void forward_into(double t, double wealth, std::span<double> record) const;
  void forward_features_into(std::span<const double> features, std::span<double> record) const;

  /// Accumulates into d_theta (+=) and returns the wealth cotangent. Scratch
  /// needs scratch_size() values.
  double backward_into(std::span<const double> record, std::span<const double> d_weights,
                       std::span<double> d_theta, std::span<double> scratch) const;

 private:
  struct Layer {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::size_t weight_offset = 0;  // into theta
    std::size_t bias_offset = 0;
    std::size_t input_offset = 0;   // into activation record
    std::size_t output_offset = 0;
  };

  void build_layers();

  NetTopology topology_;
  FeatureScaling scaling_;
  std::vector<double> theta_;
  std::vector<Layer> layers_;
};

/// Weights uniform on +-sqrt(6 / (fan_in + fan_out)), zero biases.
/// Deterministic in seed.
PolicyNetwork init_parameters(const NetTopology& topology, std::uint64_t seed,
                              FeatureScaling scaling = {});

}  // namespace dynalloc
