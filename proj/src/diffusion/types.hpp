// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "common/errors.hpp"

namespace cgru::diffusion {

/// Conditioning class for one generation request.
struct Context {
  int class_id = 0;
  int num_classes = 1;

  Context() = default;
  Context(int cls, int k);
  std::vector<double> encoding() const;
  friend bool operator==(const Context&, const Context&) = default;
};

/// Terminal-reward denoising MDP. The discount is fixed to one: reward only
/// arrives at x_0, so any other value would just rescale it.
struct DiffusionMDPConfig {
  std::size_t dim = 2;
  int num_classes = 8;
  double discount = 1.0;

  void validate() const;
};

/// One reverse rollout x_T -> x_0. Latents are stored by timestep: row t of
/// `latents` is x_t. Step t (1..T) is the transition x_t -> x_{t-1}.
struct Trajectory {
  Context ctx;
  int T = 0;
  std::size_t dim = 0;
  std::vector<double> latents;   // (T+1) * dim
  std::vector<double> logp_old;  // T entries, step t at index t-1
  std::optional<double> reward;
  std::vector<double> advantages;  // T entries once computed
  std::uint64_t seed = 0;          // stream index the rollout was drawn from

  std::span<const double> x(int t) const { return {latents.data() + static_cast<std::size_t>(t) * dim, dim}; }
  std::span<double> x(int t) { return {latents.data() + static_cast<std::size_t>(t) * dim, dim}; }
  double logp(int t) const { return logp_old.at(static_cast<std::size_t>(t - 1)); }
  double advantage(int t) const { return advantages.at(static_cast<std::size_t>(t - 1)); }
  std::span<const double> x0() const { return x(0); }
};

}  // namespace cgru::diffusion
