// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "numerics/tensor.hpp"

namespace cgru::numerics {

enum class LayerKind : int { dense = 1, tanh = 2, relu = 3, softmax = 4, film = 5 };

/// dense: (in, out). film: (features, cond_dim). Activations carry no dims.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t a = 0;
  std::size_t b = 0;

  static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::dense, in, out}; }
  static LayerSpec film(std::size_t features, std::size_t cond_dim) {
    return {LayerKind::film, features, cond_dim};
  }
  static LayerSpec tanh() { return {LayerKind::tanh, 0, 0}; }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
  static LayerSpec softmax() { return {LayerKind::softmax, 0, 0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Gradients aligned index-for-index with Network::params().
using ParamGrads = std::vector<Tensor>;

/// Feed-forward network over row batches. A film layer modulates its input
/// features with (scale, shift) = cond * W + b, computed per row from the
/// conditioning tensor passed to forward/backward.
class Network {
 public:
  Network() = default;

  /// Zero-initialised parameters for the given architecture.
  explicit Network(std::vector<LayerSpec> arch);

  /// Scaled-uniform weights in +-sqrt(6/(in+out)), zero biases, and film
  /// scale biases set to one so a fresh film layer starts near identity.
  static Network initialized(std::vector<LayerSpec> arch, Rng& rng);

  const std::vector<LayerSpec>& arch() const noexcept { return arch_; }
  const std::vector<NamedTensor>& params() const noexcept { return params_; }
  std::vector<NamedTensor>& params() noexcept { return params_; }
  std::size_t param_count() const;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t cond_dim() const;  // 0 when the network has no film layers
  bool has_film() const { return cond_dim() != 0; }

  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);

  /// Flat view helpers for estimators that treat parameters as one vector.
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> flat);

  ParamGrads zero_grads() const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<LayerSpec> arch_;
  std::vector<NamedTensor> params_;
  std::vector<std::size_t> first_param_;  // per layer index into params_
};

/// Activations recorded by a forward pass, reused by backward.
struct ForwardTrace {
  std::vector<Tensor> inputs;   // input of each layer
  std::vector<Tensor> film_ss;  // per film layer: (rows, 2*features) scale|shift
  Tensor output;
  Tensor cond;
};

struct BackwardResult {
  ParamGrads param_grads;
  Tensor input_grad;
};

Tensor forward(const Network& net, const Tensor& input, const Tensor* cond = nullptr);
ForwardTrace forward_trace(const Network& net, const Tensor& input, const Tensor* cond = nullptr);

/// Gradients of <out_grad, forward(input)> w.r.t. every parameter and the input.
BackwardResult backward(const Network& net, const Tensor& input, const Tensor* cond, const Tensor& out_grad);
BackwardResult backward(const Network& net, const ForwardTrace& trace, const Tensor& out_grad);

std::vector<double> flatten(const ParamGrads& grads);
ParamGrads unflatten(const Network& like, std::span<const double> flat);

}  // namespace cgru::numerics
