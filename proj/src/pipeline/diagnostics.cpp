// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "common/errors.hpp"
#include "diffusion/sampler.hpp"
#include "numerics/checkpoint.hpp"
#include "pipeline/pipeline.hpp"

namespace cgru::pipeline {

using diffusion::Trajectory;
using numerics::Network;
using numerics::Tensor;
using policy_grad::EstimatorKind;
using policy_grad::GradientEstimate;

namespace {

// Disjoint stream index ranges for the diagnostics tag.
constexpr std::uint64_t kVarianceStream = 1ULL << 40;
constexpr std::uint64_t kUnbiasedToyStream = 2ULL << 40;
constexpr std::uint64_t kUnbiasedFullStream = 3ULL << 40;
constexpr std::uint64_t kFidelityStream = 4ULL << 40;
constexpr std::uint64_t kProbeStream = 5ULL << 40;

struct Models {
  Network eps;
  Network clf;
  std::optional<critic::Critic> value;
};

Models load_models(Workspace& ws, bool need_critic) {
  ensure_prerequisites(ws, need_critic);
  Models m{numerics::load_network(ws.path(artifact::base)), numerics::load_network(ws.path(artifact::classifier)), {}};
  diffusion::check_denoiser(m.eps, denoiser_spec(ws.cfg()));
  if (need_critic) m.value.emplace(numerics::load_network(ws.path(artifact::critic)), critic_spec(ws.cfg()));
  return m;
}

std::vector<Trajectory> rewarded_rollouts(const RunConfig& cfg, const diffusion::GaussianPolicy& policy,
                                          const Network& clf, std::size_t n, std::uint64_t stream) {
  Rng ctx_rng(cfg.seed, StreamTag::contexts, stream);
  const auto contexts = mixture_contexts(cfg, n, ctx_rng);
  return rewards::assign_rewards(
      diffusion::sample_trajectories(policy, contexts, cfg.seed, stream, StreamTag::diagnostics), reward_spec(cfg),
      &clf);
}

GradientEstimate mean_of(std::span<const GradientEstimate> parts) {
  GradientEstimate out = parts.front();
  std::fill(out.grad.begin(), out.grad.end(), 0.0);
  for (const auto& p : parts)
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += p.grad[j];
  for (double& g : out.grad) g /= static_cast<double>(parts.size());
  out.n_traj = parts.size();
  return out;
}

double norm(const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

// Mean and standard error of coordinate 0 over single-trajectory estimates.
std::pair<double, double> mean_se(std::span<const GradientEstimate> est) {
  const double n = static_cast<double>(est.size());
  double mean = 0.0;
  for (const auto& e : est) mean += e.grad[0] / n;
  double ss = 0.0;
  for (const auto& e : est) ss += (e.grad[0] - mean) * (e.grad[0] - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

bool ToyCheck::within_3se() const { return std::abs(mean - target) <= 3.0 * std_error; }

double FidelityDiag::fraction_within(double tol) const {
  if (probes.empty()) return 0.0;
  const auto ok = std::count_if(probes.begin(), probes.end(),
                                [&](const FidelityProbe& p) { return std::abs(p.value - p.oracle) <= tol; });
  return static_cast<double>(ok) / static_cast<double>(probes.size());
}

VarianceDiag diag_variance(Workspace& ws) {
  VarianceDiag out;
  ws.phase("diag_variance", [&] {
    const auto& cfg = ws.cfg();
    const auto m = load_models(ws, true);
    const auto sched = schedule_of(cfg);
    diffusion::DiffusionPolicy policy(m.eps, denoiser_spec(cfg), sched);
    const auto n_batches = static_cast<std::size_t>(cfg.diag.batches);
    const auto per = static_cast<std::size_t>(cfg.diag.batch_traj);
    auto trajs = rewarded_rollouts(cfg, policy, m.clf, n_batches * per, kVarianceStream);
    policy_grad::compute_advantages(std::span(trajs), policy_grad::CriticBaseline(*m.value));

    const auto ddpo = policy_grad::per_trajectory_estimates(trajs, policy, EstimatorKind::ddpo);
    const auto cgru = policy_grad::per_trajectory_estimates(trajs, policy, EstimatorKind::cgru);
    std::vector<GradientEstimate> ddpo_b, cgru_b;
    for (std::size_t b = 0; b < n_batches; ++b) {
      ddpo_b.push_back(mean_of(std::span(ddpo).subspan(b * per, per)));
      cgru_b.push_back(mean_of(std::span(cgru).subspan(b * per, per)));
    }
    out.ddpo_variance = policy_grad::gradient_variance(ddpo_b);
    out.cgru_variance = policy_grad::gradient_variance(cgru_b);

    CsvTable table({"resample", "ddpo_variance", "cgru_variance", "cgru_lower"});
    Rng boot(cfg.seed, StreamTag::diagnostics, kVarianceStream + 1);
    out.resamples = static_cast<std::size_t>(cfg.diag.bootstrap);
    for (std::size_t r = 0; r < out.resamples; ++r) {
      std::vector<GradientEstimate> d, c;
      for (std::size_t i = 0; i < n_batches; ++i) {
        const std::size_t k = boot.below(n_batches);
        d.push_back(ddpo_b[k]);
        c.push_back(cgru_b[k]);
      }
      const double vd = policy_grad::gradient_variance(d), vc = policy_grad::gradient_variance(c);
      out.wins += vc < vd ? 1 : 0;
      table.row().add(r).add(vd).add(vc).add(vc < vd ? 1 : 0);
    }
    table.write(ws.path("diag_variance.csv"));
    ws.record("diag_variance.csv");
  });
  return out;
}

UnbiasednessDiag diag_unbiasedness(Workspace& ws) {
  UnbiasednessDiag out;
  ws.phase("diag_unbiasedness", [&] {
    const auto& cfg = ws.cfg();
    const auto n_max = static_cast<std::size_t>(cfg.diag.n_max);

    // One-step toy: true gradient 1, true baseline term 0.
    const policy_grad::LinearGaussianToy toy(cfg.diag.toy_theta);
    auto toy_trajs = policy_grad::toy_trajectories(toy, n_max, cfg.seed ^ kUnbiasedToyStream);
    {
      const auto est = policy_grad::per_trajectory_estimates(toy_trajs, toy, EstimatorKind::ddpo);
      auto [mean, se] = mean_se(est);
      out.toy.push_back({"ddpo", 0.0, mean, se, 1.0});
    }
    for (double b : {0.0, 0.5, 1.0}) {
      policy_grad::compute_advantages(std::span(toy_trajs), policy_grad::ConstantBaseline(b));
      const auto est = policy_grad::per_trajectory_estimates(toy_trajs, toy, EstimatorKind::cgru);
      auto [mean, se] = mean_se(est);
      out.toy.push_back({"cgru", b, mean, se, 1.0});
    }
    for (double b : {0.5, 1.0}) {
      auto scaled = toy_trajs;
      for (auto& tr : scaled) tr.reward = b;  // per-trajectory b * score
      const auto est = policy_grad::per_trajectory_estimates(scaled, toy, EstimatorKind::ddpo);
      auto [mean, se] = mean_se(est);
      out.toy.push_back({"baseline_term", b, mean, se, 0.0});
    }

    // Full model with the trained critic as b.
    const auto m = load_models(ws, true);
    const auto sched = schedule_of(cfg);
    diffusion::DiffusionPolicy policy(m.eps, denoiser_spec(cfg), sched);
    const auto trajs = rewarded_rollouts(cfg, policy, m.clf, n_max, kUnbiasedFullStream);
    const policy_grad::CriticBaseline baseline(*m.value);
    auto ecfg = estimator_config(cfg);
    ecfg.grad_max_norm = std::numeric_limits<double>::infinity();
    for (std::size_t n : {n_max / 100, n_max / 10, n_max}) {
      const std::span<const Trajectory> prefix(trajs.data(), n);
      const auto b = policy_grad::baseline_term_estimate(prefix, policy, baseline);
      const auto g = policy_grad::ddpo_gradient(prefix, policy, ecfg);
      out.full.push_back({n, norm(b), g.norm()});
    }
    double sxy = 0.0, sxx = 0.0, ybar = 0.0;
    for (const auto& r : out.full) {
      const double x = 1.0 / std::sqrt(static_cast<double>(r.n));
      sxy += x * r.b_norm;
      sxx += x * x;
      ybar += r.b_norm / static_cast<double>(out.full.size());
    }
    out.fit_c = sxy / sxx;
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& r : out.full) {
      const double x = 1.0 / std::sqrt(static_cast<double>(r.n));
      ss_res += (r.b_norm - out.fit_c * x) * (r.b_norm - out.fit_c * x);
      ss_tot += (r.b_norm - ybar) * (r.b_norm - ybar);
    }
    out.fit_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;

    CsvTable full({"N", "B_norm", "grad_norm", "ratio"});
    for (const auto& r : out.full) full.row().add(r.n).add(r.b_norm).add(r.grad_norm).add(r.ratio());
    full.write(ws.path("diag_unbiasedness.csv"));
    CsvTable toy_table({"estimator", "baseline", "mean", "std_error", "target", "within_3se"});
    for (const auto& t : out.toy)
      toy_table.row().add(t.estimator).add(t.baseline).add(t.mean).add(t.std_error).add(t.target).add(
          t.within_3se() ? 1 : 0);
    toy_table.write(ws.path("diag_toy_gradients.csv"));
    ws.record("diag_unbiasedness.csv");
    ws.record("diag_toy_gradients.csv");
  });
  return out;
}

AblationDiag diag_ablation(Workspace& ws) {
  AblationDiag out;
  ws.phase("diag_ablation", [&] {
    const auto& cfg = ws.cfg();
    const auto m = load_models(ws, false);
    const auto sched = schedule_of(cfg);
    diffusion::DiffusionPolicy policy(m.eps, denoiser_spec(cfg), sched);
    const auto n = static_cast<std::size_t>(cfg.diag.ablation_traj);
    const critic::CriticTraining tc{cfg.critic.epochs, static_cast<std::size_t>(cfg.critic.batch), cfg.critic.lr};
    CsvTable table({"model_kind", "held_out_mse", "seed"});
    for (std::int64_t s = 0; s < cfg.diag.ablation_seeds; ++s) {
      const std::uint64_t seed = cfg.seed * 1000 + static_cast<std::uint64_t>(s) + 1;
      Rng ctx_rng(seed, StreamTag::contexts, 1ULL << 32);
      const auto prompts = mixture_contexts(cfg, n, ctx_rng);
      Rng buf_rng(seed, StreamTag::shuffle, 1ULL << 32);
      const auto buffer = critic::build_critic_buffer(policy, prompts, reward_spec(cfg), &m.clf, n, seed, buf_rng);
      const auto r = critic::ablation_compare(buffer, critic_spec(cfg), tc, seed);
      out.runs.push_back(r);
      table.row().add(std::string("timestep_aware")).add(r.timestep_aware_mse).add(static_cast<long long>(seed));
      table.row().add(std::string("plain")).add(r.plain_mse).add(static_cast<long long>(seed));
    }
    table.write(ws.path("diag_ablation.csv"));
    ws.record("diag_ablation.csv");
  });
  return out;
}

FidelityDiag diag_fidelity(Workspace& ws) {
  FidelityDiag out;
  ws.phase("diag_fidelity", [&] {
    const auto& cfg = ws.cfg();
    const auto m = load_models(ws, true);
    const auto sched = schedule_of(cfg);
    diffusion::DiffusionPolicy policy(m.eps, denoiser_spec(cfg), sched);
    const auto n_probe = static_cast<std::size_t>(cfg.diag.probe_states);
    const auto n_roll = static_cast<std::size_t>(cfg.diag.rollouts);
    const auto trajs = rewarded_rollouts(cfg, policy, m.clf, n_probe, kFidelityStream);
    Rng pick(cfg.seed, StreamTag::diagnostics, kFidelityStream + 1);
    const auto rspec = reward_spec(cfg);
    CsvTable table({"probe", "t", "class", "value", "oracle", "abs_error"});
    for (std::size_t i = 0; i < n_probe; ++i) {
      const int t = 1 + static_cast<int>(pick.below(static_cast<std::size_t>(cfg.diffusion.T)));
      const auto& tr = trajs[i];
      Tensor starts = Tensor::matrix(n_roll, 2);
      for (std::size_t r = 0; r < n_roll; ++r) std::copy_n(tr.x(t).begin(), 2, starts.row_span(r).begin());
      const std::vector<int> classes(n_roll, tr.ctx.class_id);
      const Tensor x0 = diffusion::rollout_from(policy, starts, t, classes, cfg.seed, kProbeStream + i * n_roll);
      const auto r = rewards::evaluate_rewards(rspec, &m.clf, x0);
      const double oracle = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n_roll);
      const double value = critic::critic_forward(*m.value, tr.x(t), tr.ctx, t);
      out.probes.push_back({t, tr.ctx.class_id, value, oracle});
      table.row().add(i).add(t).add(tr.ctx.class_id).add(value).add(oracle).add(std::abs(value - oracle));
    }
    table.write(ws.path("diag_fidelity.csv"));
    ws.record("diag_fidelity.csv");
  });
  return out;
}

std::vector<policy_grad::BaselineProbe> diag_baseline_optimum(Workspace& ws) {
  std::vector<policy_grad::BaselineProbe> out;
  ws.phase("diag_baseline_optimum", [&] {
    const auto& cfg = ws.cfg();
    const double mean_r = cfg.diag.toy_theta;  // r = x_0 ~ N(theta, 1)
    const policy_grad::LinearGaussianToy toy(mean_r);
    const std::vector<double> grid{mean_r - 1.0, mean_r, mean_r + 1.0, mean_r + 0.01};
    out = policy_grad::optimal_baseline_probe(toy, grid, static_cast<std::size_t>(cfg.diag.n_max),
                                              cfg.seed ^ kProbeStream);
    CsvTable table({"baseline", "variance", "mean_grad"});
    for (const auto& p : out) table.row().add(p.baseline).add(p.variance).add(p.mean_grad);
    table.write(ws.path("diag_baseline_optimum.csv"));
    ws.record("diag_baseline_optimum.csv");
  });
  return out;
}

}  // namespace cgru::pipeline
