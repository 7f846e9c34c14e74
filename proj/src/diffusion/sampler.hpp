// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "common/rng.hpp"
#include "diffusion/policy.hpp"
#include "diffusion/types.hpp"

namespace cgru::diffusion {

/// x_T ~ N(0, I); x_{t-1} = mean(x_t, t, c) + sigma_t * xi for t = T..1,
/// recording log p(x_{t-1} | x_t, c) for every step. Reward is left unset.
Trajectory sample_trajectory(const GaussianPolicy& policy, const Context& ctx, Rng& rng);

/// Batched rollouts. Trajectory i draws from Rng(seed, tag, first_index + i),
/// so the result equals calling sample_trajectory with that stream, and does
/// not depend on worker count or on which trajectories share a batch.
std::vector<Trajectory> sample_trajectories(const GaussianPolicy& policy, std::span<const Context> contexts,
                                            std::uint64_t seed, std::uint64_t first_index,
                                            StreamTag tag = StreamTag::trajectory);

/// Continues reverse rollouts from x_t at step t down to x_0 for each row;
/// row i draws from Rng(seed, tag, first_index + i). Returns x_0 rows.
Tensor rollout_from(const GaussianPolicy& policy, const Tensor& x_t, int t, std::span<const int> classes,
                    std::uint64_t seed, std::uint64_t first_index, StreamTag tag = StreamTag::rollout);

/// Terminal samples only, for evaluation.
Tensor generate(const GaussianPolicy& policy, std::span<const int> classes, std::uint64_t seed,
                std::uint64_t first_index, StreamTag tag = StreamTag::evaluation);

}  // namespace cgru::diffusion
