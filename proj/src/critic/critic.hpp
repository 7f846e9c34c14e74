// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "common/rng.hpp"
#include "diffusion/denoiser.hpp"
#include "diffusion/policy.hpp"
#include "diffusion/types.hpp"
#include "numerics/network.hpp"
#include "rewards/rewards.hpp"

namespace cgru::critic {

using diffusion::Context;
using diffusion::StateBatch;
using numerics::Network;
using numerics::Tensor;

/// One regression target: state (x_t, c, t) and the terminal reward of the
/// trajectory it came from.
struct CriticSample {
  std::vector<double> x_t;
  Context ctx;
  int t = 0;
  double r_final = 0.0;
  std::uint64_t trajectory = 0;
};

/// x_t ++ one_hot(c) -> dense(h) -> film -> tanh -> dense(h) -> film -> tanh -> dense(1),
/// both film layers conditioned on embed(t). A plain critic has the same
/// shape but is fed a constant embedding, so it cannot see t.
struct CriticSpec {
  std::size_t dim = 2;
  int num_classes = 8;
  std::size_t hidden = 64;
  int embed_dim = 32;
  int T = 50;
  bool timestep_aware = true;

  std::size_t input_dim() const { return dim + static_cast<std::size_t>(num_classes); }
};

std::vector<numerics::LayerSpec> critic_arch(const CriticSpec& spec);

/// gamma_scale * x + gamma_shift, elementwise.
Tensor film_modulate(const Tensor& features, const Tensor& gamma_scale, const Tensor& gamma_shift);

class Critic {
 public:
  Critic(Network net, const CriticSpec& spec);
  static Critic initialized(const CriticSpec& spec, Rng& rng);

  const Network& network() const { return net_; }
  Network& network() { return net_; }
  const CriticSpec& spec() const { return spec_; }

  /// (input, cond) rows for a batch of states.
  Tensor input_rows(const StateBatch& states) const;
  Tensor cond_rows(const StateBatch& states) const;

  std::vector<double> values(const StateBatch& states) const;

 private:
  Network net_;
  CriticSpec spec_;
  diffusion::EmbeddingTable emb_;
};

/// V(x_t, c, t). Throws UsageError for t outside [0, T].
double critic_forward(const Critic& critic, std::span<const double> x_t, const Context& ctx, int t);

StateBatch to_states(std::span<const CriticSample> samples);

/// Rolls out n_traj trajectories (prompt i % |prompts| for trajectory i),
/// scores each x_0, and stores one sample per step t = 1..T carrying that
/// trajectory's reward. The returned buffer is shuffled with rng.
std::vector<CriticSample> build_critic_buffer(const diffusion::GaussianPolicy& policy, std::span<const Context> prompts,
                                              const rewards::RewardSpec& reward, const Network* classifier,
                                              std::size_t n_traj, std::uint64_t seed, Rng& rng);

struct CriticTraining {
  int epochs = 20;
  std::size_t batch = 128;
  double lr = 1e-3;
};

/// Mean squared error regression of V onto r_final with Adam. The buffer is
/// put into a canonical order first, then reshuffled every epoch with rng,
/// so the result does not depend on the order samples arrive in. Returns
/// the mean training loss of each epoch.
std::vector<double> critic_train(Critic& critic, std::vector<CriticSample> buffer, const CriticTraining& cfg, Rng& rng);

double critic_mse(const Critic& critic, std::span<const CriticSample> samples);

struct AblationResult {
  double timestep_aware_mse = 0.0;
  double plain_mse = 0.0;
};

/// Trains a timestep-aware and a plain critic from identical initial weights
/// on the same trajectories (80%) and reports held-out MSE on the rest.
AblationResult ablation_compare(std::span<const CriticSample> buffer, const CriticSpec& spec,
                                const CriticTraining& cfg, std::uint64_t seed);

}  // namespace cgru::critic
