// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "critic/critic.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "diffusion/sampler.hpp"
#include "numerics/adam.hpp"

namespace cgru::critic {

using numerics::LayerSpec;

std::vector<LayerSpec> critic_arch(const CriticSpec& spec) {
  const auto e = static_cast<std::size_t>(spec.embed_dim);
  return {LayerSpec::dense(spec.input_dim(), spec.hidden), LayerSpec::film(spec.hidden, e), LayerSpec::tanh(),
          LayerSpec::dense(spec.hidden, spec.hidden),      LayerSpec::film(spec.hidden, e), LayerSpec::tanh(),
          LayerSpec::dense(spec.hidden, 1)};
}

Tensor film_modulate(const Tensor& features, const Tensor& gamma_scale, const Tensor& gamma_shift) {
  if (features.shape() != gamma_scale.shape() || features.shape() != gamma_shift.shape())
    throw ShapeError("film_modulate: features, scale and shift must have the same shape");
  Tensor out = features;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gamma_scale[i] * features[i] + gamma_shift[i];
  return out;
}

Critic::Critic(Network net, const CriticSpec& spec) : net_(std::move(net)), spec_(spec), emb_(spec.T, spec.embed_dim) {
  if (net_.input_dim() != spec_.input_dim() || net_.output_dim() != 1 ||
      net_.cond_dim() != static_cast<std::size_t>(spec_.embed_dim))
    throw ShapeError("critic network incompatible with critic spec (input " + std::to_string(net_.input_dim()) +
                     ", cond " + std::to_string(net_.cond_dim()) + ")");
}

Critic Critic::initialized(const CriticSpec& spec, Rng& rng) {
  return Critic(Network::initialized(critic_arch(spec), rng), spec);
}

Tensor Critic::input_rows(const StateBatch& states) const {
  const std::size_t rows = states.rows(), d = spec_.dim;
  if (states.x_t.rows() != rows || states.x_t.cols() != d) throw ShapeError("critic: state batch shape mismatch");
  Tensor in = Tensor::matrix(rows, spec_.input_dim());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) in(r, j) = states.x_t(r, j);
    const int c = states.cls[r];
    if (c < 0 || c >= spec_.num_classes) throw UsageError("critic: class id out of range");
    in(r, d + static_cast<std::size_t>(c)) = 1.0;
  }
  return in;
}

Tensor Critic::cond_rows(const StateBatch& states) const {
  const std::size_t rows = states.rows(), e = static_cast<std::size_t>(spec_.embed_dim);
  Tensor cond = Tensor::matrix(rows, e);
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = states.t[r];
    if (t < 0 || t > spec_.T) throw UsageError("critic: timestep " + std::to_string(t) + " outside [0, T]");
    auto row = emb_.row(spec_.timestep_aware ? t : 0);
    std::copy(row.begin(), row.end(), cond.row_span(r).begin());
  }
  return cond;
}

std::vector<double> Critic::values(const StateBatch& states) const {
  Tensor cond = cond_rows(states);
  Tensor out = numerics::forward(net_, input_rows(states), &cond);
  return out.storage();
}

double critic_forward(const Critic& critic, std::span<const double> x_t, const Context& ctx, int t) {
  StateBatch s{Tensor::row({x_t.begin(), x_t.end()}), {t}, {ctx.class_id}};
  return critic.values(s).front();
}

StateBatch to_states(std::span<const CriticSample> samples) {
  StateBatch s;
  const std::size_t d = samples.empty() ? 0 : samples.front().x_t.size();
  s.x_t = Tensor::matrix(samples.size(), d);
  s.t.reserve(samples.size());
  s.cls.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].x_t.begin(), samples[i].x_t.end(), s.x_t.row_span(i).begin());
    s.t.push_back(samples[i].t);
    s.cls.push_back(samples[i].ctx.class_id);
  }
  return s;
}

std::vector<CriticSample> build_critic_buffer(const diffusion::GaussianPolicy& policy, std::span<const Context> prompts,
                                              const rewards::RewardSpec& reward, const Network* classifier,
                                              std::size_t n_traj, std::uint64_t seed, Rng& rng) {
  if (n_traj == 0) throw UsageError("build_critic_buffer: n_traj must be at least 1");
  if (prompts.empty()) throw UsageError("build_critic_buffer: no prompts");
  std::vector<Context> contexts(n_traj);
  for (std::size_t i = 0; i < n_traj; ++i) contexts[i] = prompts[i % prompts.size()];
  auto trajs = rewards::assign_rewards(diffusion::sample_trajectories(policy, contexts, seed, 0, StreamTag::critic), reward, classifier);
  std::vector<CriticSample> buffer;
  buffer.reserve(n_traj * static_cast<std::size_t>(policy.num_steps()));
  for (const auto& tr : trajs)
    for (int t = tr.T; t >= 1; --t)
      buffer.push_back({{tr.x(t).begin(), tr.x(t).end()}, tr.ctx, t, *tr.reward, tr.seed});
  rng.shuffle(std::span(buffer));
  return buffer;
}

namespace {

bool canonical_less(const CriticSample& a, const CriticSample& b) {
  return std::tie(a.trajectory, a.t, a.ctx.class_id, a.r_final, a.x_t) <
         std::tie(b.trajectory, b.t, b.ctx.class_id, b.r_final, b.x_t);
}

}  // namespace

double critic_mse(const Critic& critic, std::span<const CriticSample> samples) {
  if (samples.empty()) throw UsageError("critic_mse: empty sample set");
  auto v = critic.values(to_states(samples));
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) sum += (v[i] - samples[i].r_final) * (v[i] - samples[i].r_final);
  return sum / static_cast<double>(samples.size());
}

std::vector<double> critic_train(Critic& critic, std::vector<CriticSample> buffer, const CriticTraining& cfg, Rng& rng) {
  if (buffer.empty()) throw UsageError("critic_train: empty buffer");
  if (cfg.batch == 0 || cfg.epochs < 0) throw UsageError("critic_train: invalid batch/epochs");
  std::sort(buffer.begin(), buffer.end(), canonical_less);
  Network& net = critic.network();
  auto adam = numerics::AdamState::for_network(net, cfg.lr);
  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(buffer));
    double total = 0.0;
    for (std::size_t start = 0; start < buffer.size(); start += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, buffer.size() - start);
      auto batch = std::span(buffer).subspan(start, n);
      StateBatch states = to_states(batch);
      Tensor cond = critic.cond_rows(states);
      auto trace = numerics::forward_trace(net, critic.input_rows(states), &cond);
      Tensor g = Tensor::matrix(n, 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double err = trace.output[i] - batch[i].r_final;
        total += err * err;
        g[i] = 2.0 * err / static_cast<double>(n);
      }
      numerics::adam_step(adam, net, numerics::backward(net, trace, g).param_grads);
    }
    history.push_back(total / static_cast<double>(buffer.size()));
  }
  return history;
}

AblationResult ablation_compare(std::span<const CriticSample> buffer, const CriticSpec& spec,
                                const CriticTraining& cfg, std::uint64_t seed) {
  std::set<int> steps;
  std::set<std::uint64_t> traj_ids;
  for (const auto& s : buffer) {
    steps.insert(s.t);
    traj_ids.insert(s.trajectory);
  }
  if (steps.size() < 2) throw UsageError("ablation_compare: buffer must cover more than one timestep");
  if (traj_ids.size() < 2) throw UsageError("ablation_compare: buffer must cover at least two trajectories");

  std::vector<std::uint64_t> ids(traj_ids.begin(), traj_ids.end());
  Rng split_rng(seed, StreamTag::shuffle, 1);
  split_rng.shuffle(std::span(ids));
  const std::size_t n_hold = std::max<std::size_t>(1, ids.size() / 5);
  std::set<std::uint64_t> held(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<CriticSample> train, test;
  for (const auto& s : buffer) (held.count(s.trajectory) ? test : train).push_back(s);

  auto run = [&](bool aware) {
    CriticSpec sp = spec;
    sp.timestep_aware = aware;
    Rng init(seed, StreamTag::init, 7);
    Critic c = Critic::initialized(sp, init);
    Rng train_rng(seed, StreamTag::training, 7);
    critic_train(c, train, cfg, train_rng);
    return critic_mse(c, test);
  };
  return {run(true), run(false)};
}

}  // namespace cgru::critic
