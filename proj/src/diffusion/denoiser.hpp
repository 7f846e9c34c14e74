// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "common/rng.hpp"
#include "diffusion/policy.hpp"
#include "diffusion/schedule.hpp"
#include "numerics/network.hpp"

namespace cgru::diffusion {

using numerics::Network;

/// Conditional epsilon-predictor: MLP over x_t ++ embed(t) ++ one_hot(c).
struct DenoiserSpec {
  std::size_t dim = 2;
  int num_classes = 8;
  int embed_dim = 32;
  std::size_t hidden = 128;
  int T = 50;

  std::size_t input_dim() const { return dim + static_cast<std::size_t>(embed_dim + num_classes); }
};

std::vector<numerics::LayerSpec> denoiser_arch(const DenoiserSpec& spec);
Network make_denoiser(const DenoiserSpec& spec, Rng& rng);

/// Throws ShapeError when net's input/output widths cannot serve spec.
void check_denoiser(const Network& net, const DenoiserSpec& spec);

/// Per-timestep embedding rows, built once.
class EmbeddingTable {
 public:
  EmbeddingTable(int t_max, int dim);
  std::span<const double> row(int t) const;
  int dim() const { return dim_; }

 private:
  int t_max_;
  int dim_;
  std::vector<double> table_;
};

Tensor denoiser_input(const DenoiserSpec& spec, const EmbeddingTable& emb, const StateBatch& states);
Tensor predict_eps(const Network& net, const DenoiserSpec& spec, const StateBatch& states);

/// Reverse kernel built from an epsilon network and a schedule.
class DiffusionPolicy final : public GaussianPolicy {
 public:
  DiffusionPolicy(const Network& net, const DenoiserSpec& spec, const NoiseSchedule& sched);

  std::size_t dim() const override { return spec_.dim; }
  int num_steps() const override { return sched_.T; }
  std::size_t param_count() const override { return net_.param_count(); }
  double sigma(int t) const override { return sched_.sigma(t); }
  std::unique_ptr<PolicyEvaluation> evaluate(const StateBatch& states) const override;

  const Network& network() const { return net_; }
  const NoiseSchedule& schedule() const { return sched_; }
  const DenoiserSpec& spec() const { return spec_; }

 private:
  const Network& net_;
  DenoiserSpec spec_;
  const NoiseSchedule& sched_;
  EmbeddingTable emb_;
};

}  // namespace cgru::diffusion
