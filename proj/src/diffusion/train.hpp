// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "common/rng.hpp"
#include "diffusion/dataset.hpp"
#include "diffusion/denoiser.hpp"
#include "numerics/adam.hpp"

namespace cgru::diffusion {

/// Noised training inputs for one DDPM step: t ~ U{1..T}, eps ~ N(0, I).
struct DdpmDraw {
  StateBatch states;  // x_t = q_sample(x0, t, eps)
  Tensor eps;
};

DdpmDraw draw_ddpm_batch(const LabeledData& batch, const NoiseSchedule& sched, Rng& rng);

/// Mean over rows of |eps - eps_pred|^2.
double ddpm_loss(const Tensor& eps_pred, const Tensor& eps);

struct TrainStep {
  double loss = 0.0;
  numerics::ParamGrads grads;
};

TrainStep ddpm_train_step(const Network& net, const DenoiserSpec& spec, const LabeledData& batch,
                          const NoiseSchedule& sched, Rng& rng);

}  // namespace cgru::diffusion
