// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "policy_grad/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common/errors.hpp"
#include "common/parallel.hpp"
#include "diffusion/sampler.hpp"
#include "diffusion/schedule.hpp"

namespace cgru::policy_grad {

namespace {

constexpr std::size_t kChunkRows = 256;

struct Row {
  std::size_t traj;
  int t;
};

struct Accumulated {
  std::vector<double> sum;
  std::size_t clips = 0;
  std::size_t weights = 0;
  double loss = 0.0;  // sum of -w * m
};

class ToyEvaluation final : public diffusion::PolicyEvaluation {
 public:
  ToyEvaluation(double theta, std::size_t rows) : theta_(theta) { mean_ = Tensor::matrix(rows, 1, theta); }
  std::vector<double> score_vjp(const Tensor& x_prev, std::span<const double> coeff) const override {
    double g = 0.0;
    for (std::size_t r = 0; r < coeff.size(); ++r) g += coeff[r] * (x_prev[r] - theta_);
    return {g};
  }

 private:
  double theta_;
};

// sum_r coeff_r * grad log p(x_{t_r - 1} | x_{t_r}) over rows[begin, end),
// coeff_r = w_r * mult[r] with w_r = 1 unless importance weighting is on.
Accumulated score_sum_serial(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                             std::span<const Row> rows, std::span<const double> mult, bool importance,
                             const EstimatorConfig& cfg) {
  const std::size_t d = policy.dim(), n = rows.size();
  StateBatch states;
  states.x_t = Tensor::matrix(n, d);
  states.t.resize(n);
  states.cls.resize(n);
  Tensor x_prev = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory& tr = trajs[rows[i].traj];
    const int t = rows[i].t;
    std::copy_n(tr.x(t).begin(), d, states.x_t.row_span(i).begin());
    std::copy_n(tr.x(t - 1).begin(), d, x_prev.row_span(i).begin());
    states.t[i] = t;
    states.cls[i] = tr.ctx.class_id;
  }
  auto ev = policy.evaluate(states);
  Accumulated acc;
  std::vector<double> coeff(n);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (importance) {
      const double logp_new =
          diffusion::gaussian_logprob(x_prev.row_span(i), ev->mean().row_span(i), policy.sigma(states.t[i]));
      w = importance_weight(logp_new, trajs[rows[i].traj].logp(rows[i].t), cfg, &acc.clips);
      ++acc.weights;
    }
    coeff[i] = w * mult[i];
    acc.loss -= coeff[i];
  }
  acc.sum = ev->score_vjp(x_prev, coeff);
  return acc;
}

// Fixed-size row chunks evaluated in parallel, reduced in chunk order, so
// the result does not depend on the number of workers.
Accumulated score_sum(std::span<const Trajectory> trajs, const GaussianPolicy& policy, std::span<const Row> rows,
                      std::span<const double> mult, bool importance, const EstimatorConfig& cfg) {
  const std::size_t n_chunks = (rows.size() + kChunkRows - 1) / kChunkRows;
  std::vector<Accumulated> parts(n_chunks);
  parallel_for(n_chunks, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const std::size_t lo = c * kChunkRows, len = std::min(kChunkRows, rows.size() - lo);
      parts[c] = score_sum_serial(trajs, policy, rows.subspan(lo, len), mult.subspan(lo, len), importance, cfg);
    }
  });
  Accumulated total;
  total.sum.assign(policy.param_count(), 0.0);
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < total.sum.size(); ++j) total.sum[j] += p.sum[j];
    total.clips += p.clips;
    total.weights += p.weights;
    total.loss += p.loss;
  }
  return total;
}

void check_batch(std::span<const Trajectory> trajs, const GaussianPolicy& policy, const char* what) {
  if (trajs.empty()) throw UsageError(std::string(what) + ": empty trajectory batch");
  for (const auto& tr : trajs)
    if (tr.T != policy.num_steps() || tr.dim != policy.dim())
      throw ShapeError(std::string(what) + ": trajectory shape does not match the policy");
}

double reward_of(const Trajectory& tr, const char* what) {
  if (!tr.reward) throw UsageError(std::string(what) + ": trajectory reward is unset");
  return *tr.reward;
}

double advantage_of(const Trajectory& tr, int t, const char* what) {
  if (tr.advantages.size() != static_cast<std::size_t>(tr.T))
    throw UsageError(std::string(what) + ": trajectory advantages are missing");
  return tr.advantage(t);
}

std::vector<Row> trajectory_major_rows(std::size_t n_traj, int T) {
  std::vector<Row> rows;
  rows.reserve(n_traj * static_cast<std::size_t>(T));
  for (std::size_t i = 0; i < n_traj; ++i)
    for (int t = T; t >= 1; --t) rows.push_back({i, t});
  return rows;
}

std::vector<int> shuffled_steps(int T, Rng& rng) {
  std::vector<int> steps(static_cast<std::size_t>(T));
  std::iota(steps.rbegin(), steps.rend(), 1);  // T, T-1, ..., 1
  rng.shuffle(std::span(steps));
  return steps;
}

// Step-major rows: for each step in order, every trajectory in [first, last).
std::vector<Row> step_major_rows(std::span<const int> steps, std::size_t first, std::size_t last) {
  std::vector<Row> rows;
  rows.reserve(steps.size() * (last - first));
  for (int t : steps)
    for (std::size_t i = first; i < last; ++i) rows.push_back({i, t});
  return rows;
}

std::vector<double> advantage_multipliers(std::span<const Trajectory> trajs, std::span<const Row> rows,
                                          const EstimatorConfig& cfg, const char* what) {
  std::vector<double> m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) m[i] = advantage_of(trajs[rows[i].traj], rows[i].t, what);
  if (cfg.normalize_advantages && m.size() > 1) {
    const double mean = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
    double var = 0.0;
    for (double v : m) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(m.size() - 1));
    for (double& v : m) v = (v - mean) / (sd + 1e-8);
  }
  return m;
}

GradientEstimate finish(Accumulated acc, EstimatorKind kind, std::size_t n_traj, double max_norm) {
  GradientEstimate est;
  est.grad = std::move(acc.sum);
  const double inv = 1.0 / static_cast<double>(n_traj);
  for (double& g : est.grad) g *= inv;
  for (double g : est.grad)
    if (!std::isfinite(g)) throw NumericError(to_string(kind) + " gradient is not finite");
  est.pre_clip_norm = clip_global_norm(est.grad, max_norm);
  est.estimator = kind;
  est.n_traj = n_traj;
  est.sum_abs_weight_clips = acc.clips;
  return est;
}

}  // namespace

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::ddpo: return "ddpo";
    case EstimatorKind::ddpo_is: return "ddpo_is";
    case EstimatorKind::cgru: return "cgru";
  }
  return "unknown";
}

void EstimatorConfig::validate() const {
  if (!(is_clip_low > 0.0 && is_clip_low <= 1.0 && is_clip_high >= 1.0))
    throw ConfigError("importance clip must satisfy 0 < low <= 1 <= high");
  if (!(grad_max_norm > 0.0)) throw ConfigError("grad_max_norm must be positive");
}

double GradientEstimate::norm() const {
  double s = 0.0;
  for (double g : grad) s += g * g;
  return std::sqrt(s);
}

std::unique_ptr<diffusion::PolicyEvaluation> LinearGaussianToy::evaluate(const StateBatch& states) const {
  return std::make_unique<ToyEvaluation>(theta_, states.rows());
}

std::vector<Trajectory> toy_trajectories(const LinearGaussianToy& toy, std::size_t n, std::uint64_t seed) {
  std::vector<diffusion::Context> ctx(n, diffusion::Context(0, 1));
  auto trajs = diffusion::sample_trajectories(toy, ctx, seed, 0, StreamTag::diagnostics);
  for (auto& tr : trajs) tr.reward = tr.x0()[0];
  return trajs;
}

StateBatch trajectory_states(std::span<const Trajectory> trajs) {
  StateBatch s;
  if (trajs.empty()) return s;
  const std::size_t d = trajs.front().dim;
  const auto T = static_cast<std::size_t>(trajs.front().T);
  s.x_t = Tensor::matrix(trajs.size() * T, d);
  std::size_t r = 0;
  for (const auto& tr : trajs) {
    for (int t = tr.T; t >= 1; --t, ++r) {
      std::copy_n(tr.x(t).begin(), d, s.x_t.row_span(r).begin());
      s.t.push_back(t);
      s.cls.push_back(tr.ctx.class_id);
    }
  }
  return s;
}

void compute_advantages(Trajectory& traj, const Baseline& baseline) {
  compute_advantages(std::span(&traj, 1), baseline);
}

void compute_advantages(std::span<Trajectory> trajs, const Baseline& baseline) {
  for (const auto& tr : trajs) reward_of(tr, "compute_advantages");
  auto values = baseline.values(trajectory_states(trajs));
  std::size_t r = 0;
  for (auto& tr : trajs) {
    tr.advantages.assign(static_cast<std::size_t>(tr.T), 0.0);
    for (int t = tr.T; t >= 1; --t, ++r) tr.advantages[static_cast<std::size_t>(t - 1)] = *tr.reward - values[r];
  }
}

double importance_weight(double logp_new, double logp_old, const EstimatorConfig& cfg, std::size_t* clip_count) {
  const double w = std::exp(logp_new - logp_old);
  if (w < cfg.is_clip_low || w > cfg.is_clip_high) {
    if (clip_count) ++*clip_count;
    return std::clamp(w, cfg.is_clip_low, cfg.is_clip_high);
  }
  return w;
}

double clip_global_norm(std::vector<double>& g, double max_norm) {
  double s = 0.0;
  for (double v : g) s += v * v;
  const double norm = std::sqrt(s);
  if (norm > max_norm && std::isfinite(max_norm)) {
    const double scale = max_norm / norm;
    for (double& v : g) v *= scale;
  }
  return norm;
}

GradientEstimate ddpo_gradient(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                               const EstimatorConfig& cfg) {
  check_batch(trajs, policy, "ddpo_gradient");
  auto rows = trajectory_major_rows(trajs.size(), policy.num_steps());
  std::vector<double> m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) m[i] = reward_of(trajs[rows[i].traj], "ddpo_gradient");
  return finish(score_sum(trajs, policy, rows, m, false, cfg), EstimatorKind::ddpo, trajs.size(),
                cfg.grad_max_norm);
}

GradientEstimate ddpo_is_gradient(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                                  const EstimatorConfig& cfg) {
  check_batch(trajs, policy, "ddpo_is_gradient");
  auto rows = trajectory_major_rows(trajs.size(), policy.num_steps());
  std::vector<double> m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) m[i] = reward_of(trajs[rows[i].traj], "ddpo_is_gradient");
  return finish(score_sum(trajs, policy, rows, m, true, cfg), EstimatorKind::ddpo_is, trajs.size(),
                cfg.grad_max_norm);
}

GradientEstimate cgru_gradient(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                               const EstimatorConfig& cfg, Rng& rng) {
  check_batch(trajs, policy, "cgru_gradient");
  auto steps = shuffled_steps(policy.num_steps(), rng);
  auto rows = step_major_rows(steps, 0, trajs.size());
  auto m = advantage_multipliers(trajs, rows, cfg, "cgru_gradient");
  return finish(score_sum(trajs, policy, rows, m, true, cfg), EstimatorKind::cgru, trajs.size(), cfg.grad_max_norm);
}

std::vector<double> baseline_term_estimate(std::span<const Trajectory> trajs, const GaussianPolicy& policy,
                                           const Baseline& baseline) {
  check_batch(trajs, policy, "baseline_term_estimate");
  auto rows = trajectory_major_rows(trajs.size(), policy.num_steps());
  auto b = baseline.values(trajectory_states(trajs));  // same trajectory-major order
  EstimatorConfig cfg;
  cfg.grad_max_norm = std::numeric_limits<double>::infinity();
  return finish(score_sum(trajs, policy, rows, b, false, cfg), EstimatorKind::cgru, trajs.size(), cfg.grad_max_norm)
      .grad;
}

std::vector<GradientEstimate> per_trajectory_estimates(std::span<const Trajectory> trajs,
                                                       const GaussianPolicy& policy, EstimatorKind kind) {
  check_batch(trajs, policy, "per_trajectory_estimates");
  EstimatorConfig cfg;
  cfg.grad_max_norm = std::numeric_limits<double>::infinity();
  const int T = policy.num_steps();
  std::vector<GradientEstimate> out(trajs.size());
  parallel_for(trajs.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::vector<Row> rows;
      std::vector<double> m;
      for (int t = T; t >= 1; --t) {
        rows.push_back({0, t});
        m.push_back(kind == EstimatorKind::cgru ? advantage_of(trajs[i], t, "per_trajectory_estimates")
                                                : reward_of(trajs[i], "per_trajectory_estimates"));
      }
      auto acc = score_sum_serial(trajs.subspan(i, 1), policy, rows, m, kind != EstimatorKind::ddpo, cfg);
      out[i] = finish(std::move(acc), kind, 1, cfg.grad_max_norm);
    }
  });
  return out;
}

double gradient_variance(std::span<const GradientEstimate> estimates) {
  if (estimates.size() < 2) throw UsageError("gradient_variance: need at least two estimates");
  const std::size_t p = estimates.front().grad.size();
  for (const auto& e : estimates)
    if (e.grad.size() != p) throw ShapeError("gradient_variance: estimates differ in length");
  if (p == 0) throw ShapeError("gradient_variance: empty gradients");
  const double n = static_cast<double>(estimates.size());
  double total = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (const auto& e : estimates) mean += e.grad[j];
    mean /= n;
    double ss = 0.0;
    for (const auto& e : estimates) ss += (e.grad[j] - mean) * (e.grad[j] - mean);
    total += ss / (n - 1.0);
  }
  return total / static_cast<double>(p);
}

std::vector<BaselineProbe> optimal_baseline_probe(const LinearGaussianToy& toy, std::span<const double> baselines,
                                                  std::size_t n, std::uint64_t seed) {
  if (n < 2) throw UsageError("optimal_baseline_probe: need at least two rollouts");
  auto trajs = toy_trajectories(toy, n, seed);
  std::vector<BaselineProbe> out;
  for (double b : baselines) {
    compute_advantages(std::span(trajs), ConstantBaseline(b));
    auto est = per_trajectory_estimates(trajs, toy, EstimatorKind::cgru);
    double mean = 0.0;
    for (const auto& e : est) mean += e.grad[0];
    mean /= static_cast<double>(n);
    out.push_back({b, gradient_variance(est), mean});
  }
  return out;
}

UpdateStats policy_update_epoch(numerics::Network& net, const GaussianPolicy& policy, std::span<Trajectory> buffer,
                                const Baseline& baseline, const EstimatorConfig& cfg, const UpdateOptions& opts,
                                numerics::AdamState& opt, Rng& rng) {
  std::span<const Trajectory> trajs(buffer);
  check_batch(trajs, policy, "policy_update_epoch");
  if (opts.batch == 0 || opts.grad_accum == 0) throw UsageError("policy_update_epoch: batch and grad_accum must be positive");
  compute_advantages(buffer, baseline);

  auto steps = shuffled_steps(policy.num_steps(), rng);
  // Normalisation, when enabled, is over the whole buffer.
  auto all_rows = step_major_rows(steps, 0, trajs.size());
  auto all_m = advantage_multipliers(trajs, all_rows, cfg, "policy_update_epoch");
  std::vector<double> m_of(all_rows.size());  // indexed traj * T + (t - 1)
  const auto T = static_cast<std::size_t>(policy.num_steps());
  for (std::size_t i = 0; i < all_rows.size(); ++i)
    m_of[all_rows[i].traj * T + static_cast<std::size_t>(all_rows[i].t - 1)] = all_m[i];

  UpdateStats stats;
  double loss_total = 0.0;
  // A minibatch is one timestep over `batch` trajectories; an optimizer step
  // accumulates `grad_accum` consecutive timesteps of the shuffled order.
  for (std::size_t g = 0; g < steps.size(); g += opts.grad_accum) {
    const std::span<const int> group =
        std::span<const int>(steps).subspan(g, std::min(opts.grad_accum, steps.size() - g));
    for (std::size_t first = 0; first < trajs.size(); first += opts.batch) {
      const std::size_t last = std::min(trajs.size(), first + opts.batch);
      auto rows = step_major_rows(group, first, last);
      std::vector<double> m(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        m[i] = m_of[rows[i].traj * T + static_cast<std::size_t>(rows[i].t - 1)];
      auto acc = score_sum(trajs, policy, rows, m, true, cfg);
      stats.clip_count += acc.clips;
      stats.weight_count += acc.weights;
      loss_total += acc.loss;
      auto est = finish(std::move(acc), EstimatorKind::cgru, last - first, cfg.grad_max_norm);
      // est.grad ascends J; the optimizer descends the loss -J.
      for (double& v : est.grad) v = -v;
      numerics::adam_step(opt, net, numerics::unflatten(net, est.grad));
      stats.last_grad_norm = est.pre_clip_norm;
      ++stats.optimizer_steps;
    }
  }
  stats.mean_loss = loss_total / static_cast<double>(all_rows.size());
  stats.stale = stats.weight_count > 0 && 2 * stats.clip_count > stats.weight_count;
  return stats;
}

}  // namespace cgru::policy_grad
