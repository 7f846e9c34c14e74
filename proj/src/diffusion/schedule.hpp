// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace cgru::diffusion {

/// Per-step tables indexed by t = 0..T. Entry 0 is the clean-data sentinel
/// (beta 0, alpha 1, alpha_bar 1, sigma 0); steps 1..T are the real schedule.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  std::vector<double> sigmas;  // reverse-step stddev, sqrt(beta_t)

  double beta(int t) const { return betas.at(checked(t)); }
  double alpha(int t) const { return alphas.at(checked(t)); }
  double alpha_bar(int t) const { return alpha_bars.at(checked(t)); }
  double sigma(int t) const { return sigmas.at(checked(t)); }

  /// Throws UsageError unless 1 <= t <= T.
  std::size_t checked(int t) const;
};

/// Linearly spaced betas from beta_start to beta_end over T steps.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);
NoiseSchedule schedule_from_betas(std::span<const double> betas);

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
std::vector<double> q_sample(std::span<const double> x0, int t, std::span<const double> eps, const NoiseSchedule& s);

/// (x_t - beta_t / sqrt(1 - abar_t) * eps) / sqrt(alpha_t).
std::vector<double> reverse_mean_from_eps(std::span<const double> x_t, std::span<const double> eps, int t,
                                          const NoiseSchedule& s);

/// Isotropic Gaussian log density: -(d/2) ln(2 pi sigma^2) - |x - mu|^2 / (2 sigma^2).
double gaussian_logprob(std::span<const double> x, std::span<const double> mu, double sigma);

}  // namespace cgru::diffusion
