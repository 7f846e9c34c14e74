// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "diffusion/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "common/errors.hpp"

namespace cgru::diffusion {

std::size_t NoiseSchedule::checked(int t) const {
  if (t < 1 || t > T) throw UsageError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
  return static_cast<std::size_t>(t);
}

NoiseSchedule schedule_from_betas(std::span<const double> betas) {
  if (betas.empty()) throw UsageError("noise schedule needs at least one step");
  NoiseSchedule s;
  s.T = static_cast<int>(betas.size());
  s.betas = {0.0};
  s.alphas = {1.0};
  s.alpha_bars = {1.0};
  s.sigmas = {0.0};
  double abar = 1.0;
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw UsageError("beta " + std::to_string(b) + " outside (0, 1)");
    abar *= 1.0 - b;
    s.betas.push_back(b);
    s.alphas.push_back(1.0 - b);
    s.alpha_bars.push_back(abar);
    s.sigmas.push_back(std::sqrt(b));
  }
  return s;
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw UsageError("noise schedule needs T >= 1, got " + std::to_string(T));
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw UsageError("need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i)
    betas[i] = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / static_cast<double>(T - 1);
  return schedule_from_betas(betas);
}

std::vector<double> q_sample(std::span<const double> x0, int t, std::span<const double> eps, const NoiseSchedule& s) {
  if (x0.size() != eps.size()) throw ShapeError("q_sample: x0 and eps differ in dimension");
  const double a = std::sqrt(s.alpha_bar(t));
  const double b = std::sqrt(1.0 - s.alpha_bar(t));
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

std::vector<double> reverse_mean_from_eps(std::span<const double> x_t, std::span<const double> eps, int t,
                                          const NoiseSchedule& s) {
  if (x_t.size() != eps.size()) throw ShapeError("reverse_mean: x_t and eps differ in dimension");
  const double abar = s.alpha_bar(t);
  if (!(abar < 1.0)) throw NumericError("degenerate schedule: alpha_bar at step " + std::to_string(t) + " is 1");
  const double coef = s.beta(t) / std::sqrt(1.0 - abar);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
  std::vector<double> mu(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) mu[i] = inv_sqrt_alpha * (x_t[i] - coef * eps[i]);
  return mu;
}

double gaussian_logprob(std::span<const double> x, std::span<const double> mu, double sigma) {
  if (!(sigma > 0.0)) throw UsageError("gaussian_logprob: sigma must be positive");
  if (x.size() != mu.size()) throw ShapeError("gaussian_logprob: x and mu differ in dimension");
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mu[i];
    sq += d * d;
  }
  const double var = sigma * sigma;
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var) - sq / (2.0 * var);
}

}  // namespace cgru::diffusion
