#include "dynalloc/policy_net.hpp"

#include <algorithm>
#include <cmath>

#include "dynalloc/error.hpp"
#include "dynalloc/random.hpp"

namespace dynalloc {

namespace {

inline double sigmoid(double y) noexcept {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

}  // namespace

void NetTopology::validate() const {
  if (n_features < 1) throw ValidationError("topology: n_features must be >= 1");
  if (hidden_layers < 1) throw ValidationError("topology: hidden_layers must be >= 1");
  if (hidden_width < 1) throw ValidationError("topology: hidden_width must be >= 1");
  if (n_assets < 2) throw ValidationError("topology: n_assets must be >= 2");
}

std::size_t NetTopology::parameter_count() const noexcept {
  std::size_t count = (n_features + 1) * hidden_width;
  count += (hidden_layers - 1) * (hidden_width + 1) * hidden_width;
  count += (hidden_width + 1) * n_assets;
  return count;
}

std::size_t NetTopology::activation_size() const noexcept {
  return n_features + hidden_layers * hidden_width + n_assets;
}

std::size_t NetTopology::max_width() const noexcept {
  return std::max({n_features, hidden_width, n_assets});
}

FeatureScaling FeatureScaling::for_horizon(double horizon_years, double w0) {
  if (!(horizon_years > 0.0) || !(w0 > 0.0))
    throw ValidationError("feature scaling needs T > 0 and w0 > 0");
  return FeatureScaling{{0.0, 0.0}, {1.0 / horizon_years, 1.0 / w0}};
}

FeatureScaling FeatureScaling::identity(std::size_t n_features) {
  return FeatureScaling{std::vector<double>(n_features, 0.0),
                        std::vector<double>(n_features, 1.0)};
}

PolicyNetwork::PolicyNetwork(const NetTopology& topology, FeatureScaling scaling,
                             std::vector<double> theta)
    : topology_(topology), scaling_(std::move(scaling)), theta_(std::move(theta)) {
  topology_.validate();
  if (scaling_.offset.empty() && scaling_.scale.empty())
    scaling_ = FeatureScaling::identity(topology_.n_features);
  if (scaling_.offset.size() != topology_.n_features ||
      scaling_.scale.size() != topology_.n_features)
    throw ValidationError("feature scaling must have one entry per feature");
  if (theta_.empty()) theta_.assign(topology_.parameter_count(), 0.0);
  if (theta_.size() != topology_.parameter_count())
    throw ValidationError("theta length does not match topology");
  build_layers();
}

void PolicyNetwork::build_layers() {
  layers_.clear();
  std::size_t theta_pos = 0;
  std::size_t act_pos = 0;
  std::size_t fan_in = topology_.n_features;
  for (std::size_t l = 0; l <= topology_.hidden_layers; ++l) {
    const bool output = l == topology_.hidden_layers;
    Layer layer;
    layer.fan_in = fan_in;
    layer.fan_out = output ? topology_.n_assets : topology_.hidden_width;
    layer.weight_offset = theta_pos;
    layer.bias_offset = theta_pos + layer.fan_in * layer.fan_out;
    layer.input_offset = act_pos;
    layer.output_offset = act_pos + layer.fan_in;
    theta_pos = layer.bias_offset + layer.fan_out;
    act_pos = layer.output_offset;
    fan_in = layer.fan_out;
    layers_.push_back(layer);
  }
}

void PolicyNetwork::forward_into(double t, double wealth, std::span<double> record) const {
  if (topology_.n_features != 2)
    throw ValidationError("forward(t, W) requires the two-feature topology");
  const double features[2] = {t, wealth};
  forward_features_into(features, record);
}

void PolicyNetwork::forward_features_into(std::span<const double> features,
                                          std::span<double> record) const {
  const std::size_t nf = topology_.n_features;
  for (std::size_t k = 0; k < nf; ++k) {
    if (!std::isfinite(features[k])) throw ValidationError("invalid feature");
    record[k] = (features[k] - scaling_.offset[k]) * scaling_.scale[k];
  }
  const double* theta = theta_.data();
  double* act = record.data();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const double* in = act + L.input_offset;
    double* out = act + L.output_offset;
    const double* w = theta + L.weight_offset;
    const double* b = theta + L.bias_offset;
    for (std::size_t o = 0; o < L.fan_out; ++o) {
      double z = b[o];
      const double* row = w + o * L.fan_in;
      for (std::size_t i = 0; i < L.fan_in; ++i) z += row[i] * in[i];
      out[o] = z;
    }
    if (l + 1 < layers_.size()) {
      for (std::size_t o = 0; o < L.fan_out; ++o) out[o] = sigmoid(out[o]);
    } else {
      double zmax = out[0];
      for (std::size_t o = 1; o < L.fan_out; ++o) zmax = std::max(zmax, out[o]);
      double total = 0.0;
      for (std::size_t o = 0; o < L.fan_out; ++o) {
        out[o] = std::exp(out[o] - zmax);
        total += out[o];
      }
      const double inv = 1.0 / total;
      for (std::size_t o = 0; o < L.fan_out; ++o) out[o] *= inv;
    }
  }
}

double PolicyNetwork::backward_into(std::span<const double> record,
                                    std::span<const double> d_weights,
                                    std::span<double> d_theta,
                                    std::span<double> scratch) const {
  const std::size_t width = topology_.max_width();
  double* delta = scratch.data();          // cotangent of current layer pre-activations
  double* upstream = scratch.data() + width;  // cotangent of current layer inputs
  const double* act = record.data();
  const double* theta = theta_.data();
  double* grad = d_theta.data();

  // Softmax: dz_o = p_o (dp_o - <p, dp>), written as p_o sum_k p_k (dp_o - dp_k)
  // so that a constant cotangent yields exactly zero.
  const Layer& out_layer = layers_.back();
  const double* p = act + out_layer.output_offset;
  for (std::size_t o = 0; o < out_layer.fan_out; ++o) {
    double diff = 0.0;
    for (std::size_t k = 0; k < out_layer.fan_out; ++k) diff += p[k] * (d_weights[o] - d_weights[k]);
    delta[o] = p[o] * diff;
  }

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    const double* in = act + L.input_offset;
    const double* w = theta + L.weight_offset;
    double* gw = grad + L.weight_offset;
    double* gb = grad + L.bias_offset;
    for (std::size_t i = 0; i < L.fan_in; ++i) upstream[i] = 0.0;
    for (std::size_t o = 0; o < L.fan_out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* grow = gw + o * L.fan_in;
      const double* wrow = w + o * L.fan_in;
      for (std::size_t i = 0; i < L.fan_in; ++i) {
        grow[i] += d * in[i];
        upstream[i] += d * wrow[i];
      }
    }
    if (l > 0) {
      // Input of this layer is the sigmoid output of the previous one.
      for (std::size_t i = 0; i < L.fan_in; ++i) delta[i] = upstream[i] * in[i] * (1.0 - in[i]);
    }
  }
  // upstream now holds the cotangent of the scaled features; time is exogenous.
  const std::size_t wealth_feature = 1;
  if (topology_.n_features <= wealth_feature) return 0.0;
  return upstream[wealth_feature] * scaling_.scale[wealth_feature];
}

ForwardResult PolicyNetwork::forward(double t, double wealth) const {
  std::vector<double> values(activation_size());
  forward_into(t, wealth, values);
  ActivationRecord cache(topology_, std::move(values));
  auto w = cache.weights();
  return ForwardResult{std::vector<double>(w.begin(), w.end()), std::move(cache)};
}

BackwardResult PolicyNetwork::backward(const ActivationRecord& cache,
                                       std::span<const double> d_weights) const {
  if (!(cache.topology() == topology_) || cache.values().size() != activation_size())
    throw ValidationError("stale cache");
  if (d_weights.size() != topology_.n_assets)
    throw ValidationError("cotangent length must equal the number of assets");
  BackwardResult result;
  result.d_theta.d_theta.assign(parameter_count(), 0.0);
  std::vector<double> scratch(scratch_size());
  result.d_wealth = backward_into(cache.values(), d_weights, result.d_theta.d_theta, scratch);
  return result;
}

PolicyNetwork init_parameters(const NetTopology& topology, std::uint64_t seed,
                              FeatureScaling scaling) {
  PolicyNetwork net(topology, std::move(scaling));
  auto theta = net.theta();
  auto rng = Xoshiro256::stream(seed, 0x1417);
  std::size_t pos = 0;
  std::size_t fan_in = topology.n_features;
  for (std::size_t l = 0; l <= topology.hidden_layers; ++l) {
    const std::size_t fan_out =
        l == topology.hidden_layers ? topology.n_assets : topology.hidden_width;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t k = 0; k < fan_in * fan_out; ++k)
      theta[pos++] = (2.0 * rng.uniform() - 1.0) * bound;
    for (std::size_t k = 0; k < fan_out; ++k) theta[pos++] = 0.0;
    fan_in = fan_out;
  }
  return net;
}

}  // namespace dynalloc
