// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "common/rng.hpp"
#include "critic/critic.hpp"
#include "diffusion/policy.hpp"
#include "diffusion/types.hpp"
#include "numerics/adam.hpp"
#include "numerics/network.hpp"

namespace cgru::policy_grad {

using diffusion::GaussianPolicy;
using diffusion::StateBatch;
using diffusion::Trajectory;
using numerics::Tensor;

enum class EstimatorKind { ddpo, ddpo_is, cgru };
std::string to_string(EstimatorKind kind);

struct EstimatorConfig {
  double is_clip_low = 0.8;
  double is_clip_high = 1.2;
  double grad_max_norm = 1.0;  // +inf disables clipping
  bool normalize_advantages = false;

  void validate() const;
};

struct GradientEstimate {
  std::vector<double> grad;
  EstimatorKind estimator = EstimatorKind::ddpo;
  std::size_t n_traj = 0;
  std::size_t sum_abs_weight_clips = 0;
  double pre_clip_norm = 0.0;

  double norm() const;
};

/// State-dependent baseline b(x_t, c, t).
class Baseline {
 public:
  virtual ~Baseline() = default;
  virtual std::vector<double> values(const StateBatch& states) const = 0;
};

class ConstantBaseline final : public Baseline {
 public:
  explicit ConstantBaseline(double value) : value_(value) {}
  std::vector<double> values(const StateBatch& states) const override {
    return std::vector<double>(states.rows(), value_);
  }

 private:
  double value_;
};

class CriticBaseline final : public Baseline {
 public:
  explicit CriticBaseline(const critic::Critic& critic) : critic_(critic) {}
  std::vector<double> values(const StateBatch& states) const override { return critic_.values(states); }

 private:
  const critic::Critic& critic_;
};

/// One-step, one-dimensional policy x_0 ~ N(theta, 1), independent of x_1
/// and of the class. With r(x_0) = x_0 the objective is J = theta, so the
/// true gradient is exactly 1.
class LinearGaussianToy final : public GaussianPolicy {
 public:
  explicit LinearGaussianToy(double theta = 0.0) : theta_(theta) {}
  double theta() const { return theta_; }
  void set_theta(double theta) { theta_ = theta; }

  std::size_t dim() const override { return 1; }
  int num_steps() const override { return 1; }
  std::size_t param_count() const override { return 1; }
  double sigma(int) const override { return 1.0; }
  std::unique_ptr<diffusion::PolicyEvaluation> evaluate(const StateBatch& states) const override;

 private:
  double theta_;
};

/// n trajectories of the toy with reward r = x_0.
std::vector<Trajectory> toy_trajectories(const LinearGaussianToy& toy, std::size_t n, std::uint64_t seed);

/// All states x_t, t = T..1, of the given trajectories, trajectory-major.
StateBatch trajectory_states(std::span<const Trajectory> trajs);

/// advantages[t] = reward - b(x_t, c, t) for t = 1..T.
void compute_advantages(Trajectory& traj, const Baseline& baseline);
void compute_advantages(std::span<Trajectory> trajs, const Baseline& baseline);

/// clamp(exp(logp_new - logp_old), low, high); bumps *clip_count when clamped.
double importance_weight(double logp_new, double logp_old, const EstimatorConfig& cfg,
                         std::size_t* clip_count = nullptr);

/// Scales g to at most max_norm in L2; returns the norm before scaling.
double clip_global_norm(std::vector<double>& g, double max_norm);

/// Mean over trajectories of sum_t grad log p(x_{t-1} | x_t, c) * r.
GradientEstimate ddpo_gradient(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                               const EstimatorConfig& cfg);

/// As ddpo_gradient with each step weighted by the clamped importance ratio
/// against the behaviour log-probabilities stored in the trajectories.
GradientEstimate ddpo_is_gradient(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                                  const EstimatorConfig& cfg);

/// Mean over trajectories of sum_t w_t * grad log p * A_t, with the steps
/// visited in an order drawn from rng.
GradientEstimate cgru_gradient(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                               const EstimatorConfig& cfg, Rng& rng);

/// Mean over trajectories of sum_t grad log p * b(x_t, c, t). Not clipped.
std::vector<double> baseline_term_estimate(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                                           const Baseline& baseline);

/// Single-trajectory estimates, unclipped, for variance diagnostics.
/// Estimator cgru uses the stored advantages; ddpo uses the raw reward.
std::vector<GradientEstimate> per_trajectory_estimates(std::span<const Trajectory> trajs,
                                                       const GaussianPolicy& policy, EstimatorKind kind);

/// Mean over coordinates of the unbiased per-coordinate sample variance.
double gradient_variance(std::span<const GradientEstimate> estimates);

struct BaselineProbe {
  double baseline = 0.0;
  double variance = 0.0;
  double mean_grad = 0.0;
};

/// For each constant baseline, the variance of the single-trajectory
/// estimator (r - b) * grad log p over the same n toy rollouts.
std::vector<BaselineProbe> optimal_baseline_probe(const LinearGaussianToy& toy, std::span<const double> baselines,
                                                  std::size_t n, std::uint64_t seed);

struct UpdateOptions {
  std::size_t batch = 16;      // trajectories per minibatch
  std::size_t grad_accum = 2;  // timesteps accumulated per optimizer step
};

struct UpdateStats {
  double mean_loss = 0.0;
  std::size_t clip_count = 0;
  std::size_t weight_count = 0;
  std::size_t optimizer_steps = 0;
  double last_grad_norm = 0.0;
  bool stale = false;  // more than half of the importance weights clamped
};

/// One pass over a trajectory buffer: advantages from baseline, steps in a
/// shuffled order drawn from rng, importance-weighted advantage gradients
/// per minibatch, clipped Adam ascent steps on J for net. policy must evaluate through
/// net so that updates are visible to later minibatches.
UpdateStats policy_update_epoch(numerics::Network& net, const GaussianPolicy& policy, std::span<Trajectory> buffer,
                                const Baseline& baseline, const EstimatorConfig& cfg, const UpdateOptions& opts,
                                numerics::AdamState& opt, Rng& rng);

}  // namespace cgru::policy_grad
