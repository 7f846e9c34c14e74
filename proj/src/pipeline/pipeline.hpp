// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "critic/critic.hpp"
#include "diffusion/dataset.hpp"
#include "diffusion/denoiser.hpp"
#include "diffusion/schedule.hpp"
#include "metrics/metrics.hpp"
#include "pipeline/artifacts.hpp"
#include "pipeline/config.hpp"
#include "policy_grad/estimators.hpp"
#include "rewards/rewards.hpp"

namespace cgru::pipeline {

enum class Method { cgru, ddpo };
Method parse_method(const std::string& name);
std::string to_string(Method m);

namespace artifact {
inline const std::string dataset = "dataset.csv";
inline const std::string classifier = "classifier.ckpt";
inline const std::string base = "eps_base.ckpt";
inline const std::string pretrain_loss = "pretrain_loss.csv";
inline const std::string pretrain_eval = "pretrain_eval.csv";
inline const std::string critic = "critic.ckpt";
inline const std::string critic_loss = "critic_loss.csv";
inline const std::string resolved_config = "config.ini";
std::string unlearned(Method m);
std::string policy_log(Method m);
std::string monitor(Method m);
std::string eval(const std::string& label);
}  // namespace artifact

/// One output directory owned by this process for the lifetime of the
/// object. Holds the validated config and keeps manifest.json current.
class Workspace {
 public:
  Workspace(RunConfig cfg, std::filesystem::path out);

  const RunConfig& cfg() const { return cfg_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  bool has(const std::string& name) const { return std::filesystem::exists(path(name)); }
  const RunManifest& manifest() const { return manifest_; }
  std::string run_id() const { return manifest_.config_hash.substr(0, 12); }

  void record(const std::string& name);

  /// Runs body as a named phase, recording status and wall-clock time.
  void phase(const std::string& name, const std::function<void()>& body);

 private:
  RunConfig cfg_;
  std::filesystem::path dir_;
  DirLock lock_;
  RunManifest manifest_;
};

// Objects derived from the config.
diffusion::NoiseSchedule schedule_of(const RunConfig& cfg);
diffusion::DenoiserSpec denoiser_spec(const RunConfig& cfg);
critic::CriticSpec critic_spec(const RunConfig& cfg);
rewards::RewardSpec reward_spec(const RunConfig& cfg);
diffusion::MixtureSpec mixture_spec(const RunConfig& cfg);
policy_grad::EstimatorConfig estimator_config(const RunConfig& cfg);
diffusion::LabeledData training_data(const RunConfig& cfg);

/// n contexts: round(forget_fraction * n) of the target class, the rest drawn
/// uniformly from the retain classes, in shuffled order.
std::vector<diffusion::Context> mixture_contexts(const RunConfig& cfg, std::size_t n, Rng& rng);

struct Evaluation {
  metrics::EvalReport report;
  double mean_reward = 0.0;
};

/// Generates n_forget samples of the target class and n_retain samples of
/// every other class from eps with the eval seed, then scores them.
Evaluation evaluate_model(const RunConfig& cfg, const numerics::Network& eps, const numerics::Network& clf,
                          std::size_t n_forget, std::size_t n_retain);

// Phases. Each writes its artifacts under ws.dir() and records them.
void run_classifier(Workspace& ws);
void run_pretrain(Workspace& ws);
void run_critic(Workspace& ws);

struct UnlearnInputs {
  std::optional<std::filesystem::path> base;
  std::optional<std::filesystem::path> critic;
  std::optional<std::filesystem::path> classifier;
};
void run_unlearn(Workspace& ws, Method method, const UnlearnInputs& inputs = {});

/// label is "base", "cgru" or "ddpo".
Evaluation run_eval(Workspace& ws, const std::string& label);

void run_full(Workspace& ws);

/// Runs any of classifier / pretrain / critic whose artifact is missing.
void ensure_prerequisites(Workspace& ws, bool need_critic);

// Diagnostics.
struct VarianceDiag {
  double ddpo_variance = 0.0;
  double cgru_variance = 0.0;
  std::size_t wins = 0;
  std::size_t resamples = 0;
};
VarianceDiag diag_variance(Workspace& ws);

struct ToyCheck {
  std::string estimator;
  double baseline = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double target = 0.0;
  bool within_3se() const;
};
struct BTermRow {
  std::size_t n = 0;
  double b_norm = 0.0;
  double grad_norm = 0.0;
  double ratio() const { return b_norm / grad_norm; }
};
struct UnbiasednessDiag {
  std::vector<ToyCheck> toy;
  std::vector<BTermRow> full;
  double fit_c = 0.0;   // |B_N| ~ c / sqrt(N)
  double fit_r2 = 0.0;
};
UnbiasednessDiag diag_unbiasedness(Workspace& ws);

struct AblationDiag {
  std::vector<critic::AblationResult> runs;  // one per seed
};
AblationDiag diag_ablation(Workspace& ws);

struct FidelityProbe {
  int t = 0;
  int cls = 0;
  double value = 0.0;
  double oracle = 0.0;
};
struct FidelityDiag {
  std::vector<FidelityProbe> probes;
  double fraction_within(double tol) const;
};
FidelityDiag diag_fidelity(Workspace& ws);

std::vector<policy_grad::BaselineProbe> diag_baseline_optimum(Workspace& ws);

/// Aggregates eval_*.csv files of a run directory into summary.csv and
/// returns a text rendering. PhaseError naming the file when none exist.
std::string emit_report(const std::filesystem::path& dir);

}  // namespace cgru::pipeline
