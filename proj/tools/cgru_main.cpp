// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the C API. Exit status: 0 success, 2 usage or
// configuration errors, 1 anything that fails while running a phase.

#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgru/cgru.h"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "run";
};

using ConfigPtr = std::unique_ptr<cgru_config_t, decltype(&cgru_config_destroy)>;

int exit_code(cgru_status st) {
  switch (st) {
    case CGRU_OK: return 0;
    case CGRU_ERR_USAGE:
    case CGRU_ERR_CONFIG: return 2;
    default: return 1;
  }
}

int fail(cgru_status st) {
  std::fprintf(stderr, "cgru: error: %s\n", cgru_last_error_message());
  return exit_code(st);
}

void add_common(CLI::App* sub, Common& c, bool with_out = true) {
  sub->add_option("--config,-c", c.config, "INI config file (defaults when omitted)");
  sub->add_option("--set,-s", c.overrides, "Override a config value, key=value (repeatable)");
  if (with_out) sub->add_option("--out,-o", c.out, "Output directory")->capture_default_str();
}

// Loads config + overrides; a missing config file is a usage error.
cgru_status build_config(const Common& c, ConfigPtr& cfg) {
  cgru_config_t* raw = nullptr;
  if (auto st = cgru_config_create(&raw); st != CGRU_OK) return st;
  cfg.reset(raw);
  if (!c.config.empty()) {
    if (auto st = cgru_config_load_file(raw, c.config.c_str()); st != CGRU_OK)
      return st == CGRU_ERR_IO ? CGRU_ERR_CONFIG : st;
  }
  for (const auto& o : c.overrides)
    if (auto st = cgru_config_override(raw, o.c_str()); st != CGRU_OK) return st;
  return cgru_config_validate(raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critic-guided reinforcement unlearning for a toy conditional diffusion model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cgru_version()));

  Common common;
  std::string method, label = "cgru", diag_kind, report_dir = "run";
  std::function<cgru_status(const cgru_config_t*)> action;

  auto* classifier = app.add_subcommand("classifier", "Train the evaluation/reward classifier");
  add_common(classifier, common);
  classifier->callback([&] { action = [&](auto* cfg) { return cgru_run_classifier(cfg, common.out.c_str()); }; });

  auto* pretrain = app.add_subcommand("pretrain", "Train the base conditional diffusion model");
  add_common(pretrain, common);
  pretrain->callback([&] { action = [&](auto* cfg) { return cgru_run_pretrain(cfg, common.out.c_str()); }; });

  auto* critic = app.add_subcommand("critic", "Train the per-timestep critic on the base model");
  add_common(critic, common);
  critic->callback([&] { action = [&](auto* cfg) { return cgru_run_critic(cfg, common.out.c_str()); }; });

  auto* unlearn = app.add_subcommand("unlearn", "Fine-tune the base model to forget the target class");
  add_common(unlearn, common);
  unlearn->add_option("--method,-m", method, "cgru or ddpo")->required()->check(CLI::IsMember({"cgru", "ddpo"}));
  unlearn->callback([&] {
    action = [&](auto* cfg) { return cgru_run_unlearn(cfg, common.out.c_str(), method.c_str(), nullptr, nullptr, nullptr); };
  });

  auto* eval = app.add_subcommand("eval", "Evaluate UA, IRA and Frechet distance of a model");
  add_common(eval, common);
  eval->add_option("--method,-m", label, "base, cgru or ddpo")
      ->capture_default_str()
      ->check(CLI::IsMember({"base", "cgru", "ddpo"}));
  eval->callback([&] { action = [&](auto* cfg) { return cgru_run_eval(cfg, common.out.c_str(), label.c_str()); }; });

  auto* diag = app.add_subcommand("diag", "Run an estimator or critic diagnostic");
  add_common(diag, common);
  diag->add_option("kind", diag_kind, "variance, unbiasedness, ablation, baseline-optimum or fidelity")
      ->required()
      ->check(CLI::IsMember({"variance", "unbiasedness", "ablation", "baseline-optimum", "fidelity"}));
  diag->callback([&] { action = [&](auto* cfg) { return cgru_diag(cfg, common.out.c_str(), diag_kind.c_str()); }; });

  auto* full = app.add_subcommand("full", "Run every phase and both unlearning methods");
  add_common(full, common);
  full->callback([&] { action = [&](auto* cfg) { return cgru_run_full(cfg, common.out.c_str()); }; });

  auto* report = app.add_subcommand("report", "Summarise the evaluations of a run directory");
  report->add_option("--out,-o,dir", report_dir, "Run directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (report->parsed()) {
    char* text = nullptr;
    if (auto st = cgru_report(report_dir.c_str(), &text); st != CGRU_OK) return fail(st);
    std::fputs(text, stdout);
    cgru_string_free(text);
    return 0;
  }

  ConfigPtr cfg(nullptr, &cgru_config_destroy);
  if (auto st = build_config(common, cfg); st != CGRU_OK) return fail(st == CGRU_ERR_USAGE ? CGRU_ERR_CONFIG : st);
  if (auto st = action(cfg.get()); st != CGRU_OK) {
    // Usage errors raised while a phase runs (bad inputs on disk) are phase failures.
    std::fprintf(stderr, "cgru: error: %s\n", cgru_last_error_message());
    return st == CGRU_ERR_CONFIG ? 2 : 1;
  }
  std::printf("done: outputs in %s\n", common.out.c_str());
  return 0;
}
