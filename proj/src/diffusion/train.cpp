// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "diffusion/train.hpp"

namespace cgru::diffusion {

DdpmDraw draw_ddpm_batch(const LabeledData& batch, const NoiseSchedule& sched, Rng& rng) {
  const std::size_t n = batch.size(), d = batch.points.cols();
  if (n == 0) throw UsageError("ddpm step needs a non-empty batch");
  DdpmDraw draw;
  draw.states.x_t = Tensor::matrix(n, d);
  draw.states.t.resize(n);
  draw.states.cls = batch.labels;
  draw.eps = Tensor::matrix(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(sched.T)));
    draw.states.t[r] = t;
    for (std::size_t j = 0; j < d; ++j) draw.eps(r, j) = rng.normal();
    auto xt = q_sample(batch.points.row_span(r), t, draw.eps.row_span(r), sched);
    std::copy(xt.begin(), xt.end(), draw.states.x_t.row_span(r).begin());
  }
  return draw;
}

double ddpm_loss(const Tensor& eps_pred, const Tensor& eps) {
  if (eps_pred.shape() != eps.shape()) throw ShapeError("ddpm_loss: prediction and target shapes differ");
  double sum = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double d = eps_pred[k] - eps[k];
    sum += d * d;
  }
  return sum / static_cast<double>(eps.rows());
}

TrainStep ddpm_train_step(const Network& net, const DenoiserSpec& spec, const LabeledData& batch,
                          const NoiseSchedule& sched, Rng& rng) {
  check_denoiser(net, spec);
  DdpmDraw draw = draw_ddpm_batch(batch, sched, rng);
  EmbeddingTable emb(spec.T, spec.embed_dim);
  auto trace = numerics::forward_trace(net, denoiser_input(spec, emb, draw.states));
  const double n = static_cast<double>(batch.size());
  Tensor out_grad = trace.output;
  for (std::size_t k = 0; k < out_grad.size(); ++k) out_grad[k] = 2.0 * (trace.output[k] - draw.eps[k]) / n;
  TrainStep step;
  step.loss = ddpm_loss(trace.output, draw.eps);
  step.grads = numerics::backward(net, trace, out_grad).param_grads;
  return step;
}

}  // namespace cgru::diffusion
