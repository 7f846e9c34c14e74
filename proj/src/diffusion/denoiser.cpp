// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "diffusion/denoiser.hpp"

#include <cmath>

#include "numerics/embedding.hpp"

namespace cgru::diffusion {

using numerics::LayerSpec;

std::vector<double> GaussianPolicy::log_prob(const StateBatch& states, const Tensor& x_prev) const {
  auto ev = evaluate(states);
  std::vector<double> out(states.rows());
  for (std::size_t r = 0; r < states.rows(); ++r)
    out[r] = gaussian_logprob(x_prev.row_span(r), ev->mean().row_span(r), sigma(states.t[r]));
  return out;
}

std::vector<LayerSpec> denoiser_arch(const DenoiserSpec& spec) {
  return {LayerSpec::dense(spec.input_dim(), spec.hidden), LayerSpec::tanh(),
          LayerSpec::dense(spec.hidden, spec.hidden),      LayerSpec::tanh(),
          LayerSpec::dense(spec.hidden, spec.dim)};
}

Network make_denoiser(const DenoiserSpec& spec, Rng& rng) { return Network::initialized(denoiser_arch(spec), rng); }

void check_denoiser(const Network& net, const DenoiserSpec& spec) {
  if (net.input_dim() != spec.input_dim() || net.output_dim() != spec.dim || net.has_film())
    throw ShapeError("denoiser network (" + std::to_string(net.input_dim()) + " -> " +
                     std::to_string(net.output_dim()) + ") incompatible with configured input " +
                     std::to_string(spec.input_dim()) + " / output " + std::to_string(spec.dim));
}

EmbeddingTable::EmbeddingTable(int t_max, int dim) : t_max_(t_max), dim_(dim) {
  table_.reserve(static_cast<std::size_t>((t_max + 1) * dim));
  for (int t = 0; t <= t_max; ++t) {
    auto e = numerics::sinusoidal_embed(t, dim, t_max);
    table_.insert(table_.end(), e.begin(), e.end());
  }
}

std::span<const double> EmbeddingTable::row(int t) const {
  if (t < 0 || t > t_max_) throw UsageError("timestep " + std::to_string(t) + " outside embedding table");
  return {table_.data() + static_cast<std::size_t>(t * dim_), static_cast<std::size_t>(dim_)};
}

Tensor denoiser_input(const DenoiserSpec& spec, const EmbeddingTable& emb, const StateBatch& states) {
  const std::size_t rows = states.rows();
  if (states.x_t.rows() != rows || states.x_t.cols() != spec.dim || states.cls.size() != rows)
    throw ShapeError("state batch rows/dims inconsistent");
  Tensor in = Tensor::matrix(rows, spec.input_dim());
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = in.row_span(r);
    auto x = states.x_t.row_span(r);
    std::copy(x.begin(), x.end(), dst.begin());
    auto e = emb.row(states.t[r]);
    std::copy(e.begin(), e.end(), dst.begin() + static_cast<std::ptrdiff_t>(spec.dim));
    const int c = states.cls[r];
    if (c < 0 || c >= spec.num_classes) throw UsageError("class id " + std::to_string(c) + " out of range");
    dst[spec.dim + static_cast<std::size_t>(spec.embed_dim + c)] = 1.0;
  }
  return in;
}

Tensor predict_eps(const Network& net, const DenoiserSpec& spec, const StateBatch& states) {
  EmbeddingTable emb(spec.T, spec.embed_dim);
  return numerics::forward(net, denoiser_input(spec, emb, states));
}

namespace {

class DiffusionEvaluation final : public PolicyEvaluation {
 public:
  DiffusionEvaluation(const Network& net, const NoiseSchedule& sched, std::size_t dim, Tensor input,
                      std::vector<int> t)
      : net_(net), sched_(sched), t_(std::move(t)), trace_(numerics::forward_trace(net, input)) {
    const std::size_t rows = t_.size();
    mean_ = Tensor::matrix(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
      const int step = t_[r];
      const double abar = sched_.alpha_bar(step);
      if (!(abar < 1.0)) throw NumericError("degenerate schedule: alpha_bar at step " + std::to_string(step) + " is 1");
      const double coef = sched_.beta(step) / std::sqrt(1.0 - abar);
      const double inv_sqrt_alpha = 1.0 / std::sqrt(sched_.alpha(step));
      for (std::size_t j = 0; j < dim; ++j)
        mean_(r, j) = inv_sqrt_alpha * (input(r, j) - coef * trace_.output(r, j));
    }
  }

  // d log p / d eps = (x_prev - mu) / sigma^2 * (-beta / (sqrt(alpha) sqrt(1 - abar)))
  std::vector<double> score_vjp(const Tensor& x_prev, std::span<const double> coeff) const override {
    const std::size_t rows = t_.size(), dim = mean_.cols();
    if (x_prev.rows() != rows || x_prev.cols() != dim || coeff.size() != rows)
      throw ShapeError("score_vjp: x_prev/coeff do not match the evaluated batch");
    Tensor out_grad = Tensor::matrix(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
      if (coeff[r] == 0.0) continue;
      const int step = t_[r];
      const double var = sched_.sigma(step) * sched_.sigma(step);
      const double dmu_deps = -sched_.beta(step) / (std::sqrt(sched_.alpha(step)) * std::sqrt(1.0 - sched_.alpha_bar(step)));
      for (std::size_t j = 0; j < dim; ++j)
        out_grad(r, j) = coeff[r] * (x_prev(r, j) - mean_(r, j)) / var * dmu_deps;
    }
    return numerics::flatten(numerics::backward(net_, trace_, out_grad).param_grads);
  }

 private:
  const Network& net_;
  const NoiseSchedule& sched_;
  std::vector<int> t_;
  numerics::ForwardTrace trace_;
};

}  // namespace

DiffusionPolicy::DiffusionPolicy(const Network& net, const DenoiserSpec& spec, const NoiseSchedule& sched)
    : net_(net), spec_(spec), sched_(sched), emb_(sched.T, spec.embed_dim) {
  if (spec.T != sched.T) throw UsageError("denoiser spec and schedule disagree on T");
  check_denoiser(net, spec);
}

std::unique_ptr<PolicyEvaluation> DiffusionPolicy::evaluate(const StateBatch& states) const {
  return std::make_unique<DiffusionEvaluation>(net_, sched_, spec_.dim, denoiser_input(spec_, emb_, states), states.t);
}

}  // namespace cgru::diffusion
