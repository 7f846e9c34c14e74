// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, default configuration.
// Exit status is 0 when every criterion could be evaluated; --strict also
// requires every criterion to pass.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>

#include "critic/critic.hpp"
#include "diffusion/denoiser.hpp"
#include "diffusion/sampler.hpp"
#include "metrics/metrics.hpp"
#include "numerics/checkpoint.hpp"
#include "pipeline/artifacts.hpp"
#include "pipeline/pipeline.hpp"
#include "policy_grad/estimators.hpp"
#include "rewards/rewards.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace cgru;
using pipeline::Method;
using pipeline::RunConfig;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Line {
  int id = 0;
  std::string name;
  Outcome out;
  double seconds = 0.0;
  bool errored = false;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Line evaluate(int id, const std::string& name, const std::function<Outcome()>& body) {
  std::cerr << fmt::format("criterion {} ({})...\n", id, name);
  Line line{id, name, {}, 0.0, false};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    line.out = body();
  } catch (const std::exception& e) {
    line.out = {false, std::string("error: ") + e.what()};
    line.errored = true;
  }
  line.seconds = seconds_since(t0);
  return line;
}

numerics::Tensor gaussian_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  numerics::Tensor t = numerics::Tensor::matrix(rows, cols);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

Outcome gradient_correctness(const RunConfig& cfg) {
  Rng rng(2026, StreamTag::diagnostics, 1);
  const auto dspec = pipeline::denoiser_spec(cfg);
  const auto eps = diffusion::make_denoiser(dspec, rng);
  const auto cspec = pipeline::critic_spec(cfg);
  const auto critic = numerics::Network::initialized(critic::critic_arch(cspec), rng);
  const auto clf = numerics::Network::initialized(
      rewards::classifier_arch(cfg.data.K, static_cast<std::size_t>(cfg.net.clf_hidden)), rng);

  const auto cond = gaussian_rows(8, static_cast<std::size_t>(cspec.embed_dim), rng);
  const auto e = testing::finite_difference_check(eps, gaussian_rows(8, dspec.input_dim(), rng), nullptr, 20, rng);
  const auto c = testing::finite_difference_check(critic, gaussian_rows(8, cspec.input_dim(), rng), &cond, 20, rng);
  const auto k = testing::finite_difference_check(clf, gaussian_rows(8, 2, rng), nullptr, 20, rng);
  const double worst = std::max({e.max_rel_err, c.max_rel_err, k.max_rel_err});
  return {worst < 1e-4, fmt::format("max rel err eps-net {:.2e}, critic {:.2e}, classifier {:.2e} (limit 1e-4)",
                                    e.max_rel_err, c.max_rel_err, k.max_rel_err)};
}

Outcome frechet_numerics() {
  using metrics::FeatureStats;
  Rng rng(2026, StreamTag::diagnostics, 9);
  auto spd = [&] {
    Eigen::MatrixXd a(2, 2);
    for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = rng.normal();
    return Eigen::MatrixXd(a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(2, 2));
  };
  const FeatureStats a{Eigen::Vector2d(0.3, -1.0), spd(), 100};
  const double self = metrics::frechet_distance(a, a);
  const FeatureStats n0{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 100};
  const FeatureStats n1{Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1), 100};
  const double one = metrics::frechet_distance(n0, n1);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Eigen::MatrixXd cr = spd(), cg = spd();
    const double mr[2] = {rng.normal(), rng.normal()}, mg[2] = {rng.normal(), rng.normal()};
    const double r4[4] = {cr(0, 0), cr(0, 1), cr(1, 0), cr(1, 1)}, g4[4] = {cg(0, 0), cg(0, 1), cg(1, 0), cg(1, 1)};
    const FeatureStats r{Eigen::Vector2d(mr[0], mr[1]), cr, 100}, g{Eigen::Vector2d(mg[0], mg[1]), cg, 100};
    worst = std::max(worst, std::abs(metrics::frechet_distance(r, g) - testing::frechet_2d(mr, r4, mg, g4, 1e-6)));
  }
  const bool pass = self < 1e-6 && std::abs(one - 1.0) <= 1e-5 && worst < 1e-8;
  return {pass, fmt::format("self {:.1e} (<1e-6), N(0,1) vs N(1,1) {:.9f} (1 +- 1e-5), 2-D oracle max diff {:.1e} (<1e-8)",
                            self, one, worst)};
}

// Criterion 8: outcome of the first full run.
Outcome unlearning_outcome(const fs::path& run, double full_seconds) {
  auto last_value = [&](const std::string& file, const std::string& col) {
    const auto d = pipeline::read_csv(run / file);
    if (d.rows.empty()) throw PhaseError(file + " has no rows");
    return std::stod(d.rows.back()[d.column(col)]);
  };
  const double ua = last_value(pipeline::artifact::eval("cgru"), "ua");
  const double ira = last_value(pipeline::artifact::eval("cgru"), "ira");
  const double r_cgru = last_value(pipeline::artifact::policy_log(Method::cgru), "mean_reward");
  const double r_ddpo = last_value(pipeline::artifact::policy_log(Method::ddpo), "mean_reward");
  const bool pass = ua >= 0.90 && ira >= 0.70 && r_ddpo < r_cgru && full_seconds < 1800;
  return {pass, fmt::format("UA {:.4f} (>=0.90), IRA {:.4f} (>=0.70), final mean reward cgru {:.4f} vs ddpo {:.4f} "
                            "(ddpo strictly lower), full run {:.0f} s (<1800 s)",
                            ua, ira, r_cgru, r_ddpo, full_seconds)};
}

// Criterion 10: every checkpoint and csv of the two runs, byte for byte.
Outcome determinism(const fs::path& a, const fs::path& b) {
  std::map<std::string, std::string> ha, hb;
  for (const auto& [dir, out] : {std::pair{a, &ha}, std::pair{b, &hb}})
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto ext = entry.path().extension();
      if (ext == ".ckpt" || ext == ".csv") (*out)[entry.path().filename().string()] = pipeline::sha256_file(entry.path());
    }
  std::size_t differing = 0;
  std::string first;
  for (const auto& [name, h] : ha)
    if (!hb.count(name) || hb.at(name) != h) {
      if (!differing++) first = name;
    }
  const bool pass = !ha.empty() && ha.size() == hb.size() && differing == 0;
  return {pass, differing == 0 ? fmt::format("{} checkpoints and CSVs identical across two runs", ha.size())
                               : fmt::format("{} files differ, first {}", differing, first)};
}

Outcome degeneracy(const RunConfig& cfg, const fs::path& run) {
  const auto eps = numerics::load_network(run / pipeline::artifact::base);
  const auto clf = numerics::load_network(run / pipeline::artifact::classifier);
  const auto sched = pipeline::schedule_of(cfg);
  diffusion::DiffusionPolicy policy(eps, pipeline::denoiser_spec(cfg), sched);
  Rng ctx_rng(cfg.seed, StreamTag::diagnostics, 31);
  const auto ctx = pipeline::mixture_contexts(cfg, 16, ctx_rng);
  auto trajs = rewards::assign_rewards(diffusion::sample_trajectories(policy, ctx, cfg.seed, 0, StreamTag::diagnostics),
                                       pipeline::reward_spec(cfg), &clf);
  const auto cspec = pipeline::critic_spec(cfg);
  const critic::Critic zero(numerics::Network(critic::critic_arch(cspec)), cspec);
  policy_grad::compute_advantages(std::span(trajs), policy_grad::CriticBaseline(zero));
  auto ecfg = pipeline::estimator_config(cfg);
  ecfg.grad_max_norm = std::numeric_limits<double>::infinity();
  Rng rng(cfg.seed, StreamTag::diagnostics, 32);
  const auto c = policy_grad::cgru_gradient(trajs, policy, ecfg, rng);
  const auto d = policy_grad::ddpo_gradient(trajs, policy, ecfg);
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < d.grad.size(); ++i) {
    diff += (c.grad[i] - d.grad[i]) * (c.grad[i] - d.grad[i]);
    norm += d.grad[i] * d.grad[i];
  }
  const double rel = std::sqrt(diff / norm);
  return {rel < 1e-12, fmt::format("|g_cgru - g_ddpo| / |g_ddpo| = {:.2e} over 16 trajectories (<1e-12)", rel)};
}

Outcome unbiasedness(pipeline::Workspace& ws, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto u = pipeline::diag_unbiasedness(ws);
  seconds = seconds_since(t0);
  std::size_t toy_ok = 0, toy_n = 0;
  for (const auto& t : u.toy) {
    if (t.estimator == "baseline_term") continue;
    ++toy_n;
    toy_ok += t.within_3se() ? 1 : 0;
  }
  const auto& last = u.full.back();
  const bool pass = toy_n == 4 && toy_ok == toy_n && last.ratio() < 0.05 && seconds < 120;
  std::string ratios;
  for (const auto& r : u.full) ratios += fmt::format("{}{}:{:.3f}", ratios.empty() ? "" : ", ", r.n, r.ratio());
  return {pass, fmt::format("toy estimates within 3 SE {}/{}; B-term ratio at N={} is {:.3f} (<0.05) [{}]; "
                            "|B| ~ c/sqrt(N) fit R^2 {:.3f}; {:.0f} s (<120 s)",
                            toy_ok, toy_n, last.n, last.ratio(), ratios, u.fit_r2, seconds)};
}

Outcome variance(pipeline::Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto v = pipeline::diag_variance(ws);
  const double s = seconds_since(t0);
  const bool pass = v.resamples == 20 && v.wins >= 18 && s < 600;
  return {pass, fmt::format("cgru lower in {}/{} bootstrap comparisons (>=18/20); pooled variance cgru {:.4g} vs ddpo "
                            "{:.4g}; {:.0f} s (<600 s)",
                            v.wins, v.resamples, v.cgru_variance, v.ddpo_variance, s)};
}

Outcome baseline_optimum(pipeline::Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto probe = pipeline::diag_baseline_optimum(ws);
  const double s = seconds_since(t0);
  const double theta = ws.cfg().diag.toy_theta;
  const policy_grad::BaselineProbe* at_mean = nullptr;
  double others = std::numeric_limits<double>::infinity();
  for (const auto& p : probe) {
    if (p.baseline == theta) at_mean = &p;
    else if (std::abs(std::abs(p.baseline - theta) - 1.0) < 1e-12) others = std::min(others, p.variance);
  }
  if (!at_mean) throw UsageError("baseline probe grid lacks b = E[r]");
  const bool pass = at_mean->variance < others && s < 60;
  return {pass, fmt::format("variance at b=E[r] {:.4f} vs min at E[r]+-1 {:.4f}, N={}; {:.1f} s (<60 s)",
                            at_mean->variance, others, ws.cfg().diag.n_max, s)};
}

Outcome fidelity(pipeline::Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto f = pipeline::diag_fidelity(ws);
  const double s = seconds_since(t0);
  const double frac = f.fraction_within(0.5);
  const bool pass = f.probes.size() == 50 && frac >= 0.8 && s < 900;
  return {pass, fmt::format("{:.0f}% of {} probe states within 0.5 of the {}-rollout oracle (>=80%); {:.0f} s (<900 s)",
                            100 * frac, f.probes.size(), ws.cfg().diag.rollouts, s)};
}

Outcome ablation(pipeline::Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = pipeline::diag_ablation(ws);
  const double s = seconds_since(t0);
  std::size_t wins = 0;
  std::string pairs;
  for (const auto& r : a.runs) {
    wins += r.timestep_aware_mse < r.plain_mse ? 1 : 0;
    pairs += fmt::format("{}{:.2e}/{:.2e}", pairs.empty() ? "" : ", ", r.timestep_aware_mse, r.plain_mse);
  }
  const bool pass = a.runs.size() == 5 && wins == 5 && s < 600;
  return {pass, fmt::format("timestep-aware better in {}/{} seeds (need all 5); aware/plain MSE [{}]; {:.0f} s (<600 s)",
                            wins, a.runs.size(), pairs, s)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the unlearning pipeline"};
  fs::path work = fs::temp_directory_path() / "cgru_acceptance";
  std::string report;
  bool strict = false;
  app.add_option("--work", work, "Scratch directory for the pipeline runs");
  app.add_option("--report", report, "Also write the result lines to this file");
  app.add_flag("--strict", strict, "Exit non-zero when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  const RunConfig cfg;  // defaults
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path run_a = work / "run_a", run_b = work / "run_b";

  std::vector<Line> lines;
  lines.push_back(evaluate(1, "gradient correctness", [&] { return gradient_correctness(cfg); }));
  lines.back().out.pass = lines.back().out.pass && lines.back().seconds < 10;
  lines.push_back(evaluate(9, "frechet distance numerics", frechet_numerics));

  double full_seconds = 0.0;
  bool runs_ok = true;
  for (const auto& dir : {run_a, run_b}) {
    std::cerr << "full pipeline run in " << dir << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    try {
      pipeline::Workspace ws(cfg, dir);
      pipeline::run_full(ws);
    } catch (const std::exception& e) {
      std::cerr << "full run failed: " << e.what() << "\n";
      runs_ok = false;
    }
    if (dir == run_a) full_seconds = seconds_since(t0);
  }
  lines.push_back(evaluate(8, "unlearning outcome", [&] {
    if (!runs_ok) throw PhaseError("full pipeline run failed");
    return unlearning_outcome(run_a, full_seconds);
  }));
  lines.push_back(evaluate(10, "determinism", [&] { return determinism(run_a, run_b); }));
  lines.push_back(evaluate(3, "degeneracy identity", [&] { return degeneracy(cfg, run_a); }));

  std::optional<pipeline::Workspace> ws;
  try {
    ws.emplace(cfg, run_a);
  } catch (const std::exception& e) {
    std::cerr << "cannot open " << run_a << ": " << e.what() << "\n";
  }
  auto with_ws = [&](const std::function<Outcome(pipeline::Workspace&)>& f) {
    return [&, f] {
      if (!ws) throw PhaseError("no completed run to diagnose");
      return f(*ws);
    };
  };
  double unb_seconds = 0.0;
  lines.push_back(evaluate(2, "estimator unbiasedness", with_ws([&](auto& w) { return unbiasedness(w, unb_seconds); })));
  lines.push_back(evaluate(4, "variance reduction", with_ws(variance)));
  lines.push_back(evaluate(5, "optimal baseline", with_ws(baseline_optimum)));
  lines.push_back(evaluate(6, "critic fidelity", with_ws(fidelity)));
  lines.push_back(evaluate(7, "film ablation direction", with_ws(ablation)));

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  std::string text;
  std::size_t passed = 0;
  bool errored = false;
  for (const auto& l : lines) {
    text += fmt::format("[{}] {:>2} {}: {}\n", l.out.pass ? "PASS" : "FAIL", l.id, l.name, l.out.detail);
    passed += l.out.pass ? 1 : 0;
    errored = errored || l.errored;
  }
  text += fmt::format("{}/{} criteria passed\n", passed, lines.size());
  std::cout << text;
  if (!report.empty()) std::ofstream(report) << text;
  if (errored) return 1;
  return strict && passed != lines.size() ? 1 : 0;
}
