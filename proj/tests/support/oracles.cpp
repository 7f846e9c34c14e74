// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace cgru::testing {

namespace {

double weighted_sum(const numerics::Network& net, const numerics::Tensor& input, const numerics::Tensor* cond,
                    const numerics::Tensor& g) {
  const auto out = numerics::forward(net, input, cond);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * g[i];
  return s;
}

}  // namespace

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

GradCheck finite_difference_check(const numerics::Network& net, const numerics::Tensor& input,
                                  const numerics::Tensor* cond, std::size_t n_probes, Rng& rng) {
  const auto out = numerics::forward(net, input, cond);
  numerics::Tensor g(out.shape());
  for (auto& v : g.values()) v = rng.normal();
  const auto analytic = numerics::backward(net, input, cond, g);
  const auto flat = numerics::flatten(analytic.param_grads);

  constexpr double h = 1e-5;
  GradCheck res;
  numerics::Network probe = net;
  auto params = net.flat_params();
  for (std::size_t k = 0; k < n_probes; ++k) {
    const std::size_t i = rng.below(params.size());
    const double keep = params[i];
    params[i] = keep + h;
    probe.set_flat_params(params);
    const double up = weighted_sum(probe, input, cond, g);
    params[i] = keep - h;
    probe.set_flat_params(params);
    const double down = weighted_sum(probe, input, cond, g);
    params[i] = keep;
    res.max_rel_err = std::max(res.max_rel_err, rel_err(flat[i], (up - down) / (2 * h)));
    ++res.probes;
  }
  probe.set_flat_params(params);

  numerics::Tensor x = input;
  for (std::size_t k = 0; k < n_probes; ++k) {
    const std::size_t i = rng.below(x.size());
    const double keep = x[i];
    x[i] = keep + h;
    const double up = weighted_sum(net, x, cond, g);
    x[i] = keep - h;
    const double down = weighted_sum(net, x, cond, g);
    x[i] = keep;
    res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic.input_grad[i], (up - down) / (2 * h)));
    ++res.probes;
  }
  return res;
}

double trace_sqrt_2x2(double a, double b, double c, double d) {
  const double det = a * d - b * c;
  return std::sqrt(a + d + 2.0 * std::sqrt(std::max(det, 0.0)));
}

double frechet_2d(const double mu_r[2], const double cov_r[4], const double mu_g[2], const double cov_g[4],
                  double eps) {
  const double r[4] = {cov_r[0] + eps, cov_r[1], cov_r[2], cov_r[3] + eps};
  const double g[4] = {cov_g[0] + eps, cov_g[1], cov_g[2], cov_g[3] + eps};
  // M = R G; its eigenvalues are those of R^{1/2} G R^{1/2}, hence real and non-negative.
  const double m[4] = {r[0] * g[0] + r[1] * g[2], r[0] * g[1] + r[1] * g[3], r[2] * g[0] + r[3] * g[2],
                       r[2] * g[1] + r[3] * g[3]};
  const double dx = mu_r[0] - mu_g[0], dy = mu_r[1] - mu_g[1];
  const double tr = r[0] + r[3] + g[0] + g[3] - 2.0 * trace_sqrt_2x2(m[0], m[1], m[2], m[3]);
  return std::max(dx * dx + dy * dy + tr, 0.0);
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cgru_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

pipeline::RunConfig tiny_config() {
  pipeline::RunConfig c;
  c.diffusion.T = 10;
  c.diffusion.beta_start = 0.01;
  c.diffusion.beta_end = 0.5;
  c.data.n_train = 1200;
  c.net.eps_hidden = 32;
  c.net.critic_hidden = 16;
  c.net.critic_embed = 8;
  c.net.clf_hidden = 16;
  c.classifier.epochs = 3;
  c.pretrain.steps = 200;
  c.pretrain.eval_every = 100;
  c.pretrain.eval_per_class = 20;
  c.pretrain.target_acc = 0.0;
  c.critic.n_traj = 32;
  c.critic.epochs = 2;
  c.policy.iterations = 2;
  c.policy.traj_per_iter = 8;
  c.policy.batch = 4;
  c.eval.n_forget = 40;
  c.eval.n_retain = 10;
  c.eval.monitor_every = 1;
  c.eval.monitor_forget = 8;
  c.eval.monitor_retain = 4;
  c.diag.batches = 4;
  c.diag.batch_traj = 4;
  c.diag.bootstrap = 4;
  c.diag.n_max = 200;
  c.diag.probe_states = 4;
  c.diag.rollouts = 20;
  c.diag.ablation_seeds = 2;
  c.diag.ablation_traj = 20;
  return c;
}

}  // namespace cgru::testing
