// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cgru::pipeline {

/// Every field maps to one dotted key (section.name) in the config file.
struct RunConfig {
  std::uint64_t seed = 0;

  struct Diffusion {
    int T = 50;
    double beta_start = 0.002;
    double beta_end = 0.4;
  } diffusion;

  struct Data {
    int K = 8;
    double radius = 4.0;
    double stddev = 0.3;
    std::int64_t n_train = 8000;
  } data;

  struct Net {
    std::int64_t eps_hidden = 64;
    std::int64_t eps_embed = 16;
    std::int64_t critic_hidden = 64;
    std::int64_t critic_embed = 32;
    std::int64_t clf_hidden = 64;
  } net;

  struct Classifier {
    int epochs = 20;
    std::int64_t batch = 128;
    double lr = 1e-3;
  } classifier;

  struct Pretrain {
    std::int64_t steps = 3000;
    std::int64_t batch = 256;
    double lr = 2e-3;
    std::int64_t eval_every = 1000;
    std::int64_t eval_per_class = 100;
    double target_acc = 0.9;
  } pretrain;

  struct Reward {
    std::string kind = "classifier_complement";
    int target_class = 0;
    double scale = 10.0;
    double forget_fraction = 0.5;
    double center_x = 4.0;
    double center_y = 0.0;
  } reward;

  struct Critic {
    std::int64_t n_traj = 512;
    int epochs = 20;
    std::int64_t batch = 128;
    double lr = 1e-3;
  } critic;

  struct Policy {
    int iterations = 50;
    std::int64_t traj_per_iter = 16;
    std::int64_t batch = 16;
    std::int64_t grad_accum = 2;
    double lr = 3e-5;
    int inner_epochs = 1;
  } policy;

  struct Estimator {
    double is_clip_low = 0.8;
    double is_clip_high = 1.2;
    double grad_max_norm = 1.0;
    bool normalize_advantages = false;
  } estimator;

  struct Eval {
    std::uint64_t seed = 1234;
    std::int64_t n_forget = 200;
    std::int64_t n_retain = 100;
    std::int64_t monitor_every = 10;
    std::int64_t monitor_forget = 64;
    std::int64_t monitor_retain = 16;
    std::string fd_features = "raw";
  } eval;

  struct Pipeline {
    bool compare_ddpo = true;
  } pipeline;

  struct Diag {
    std::int64_t batches = 20;
    std::int64_t batch_traj = 16;
    std::int64_t bootstrap = 20;
    std::int64_t n_max = 10000;
    std::int64_t probe_states = 50;
    std::int64_t rollouts = 1000;
    std::int64_t ablation_seeds = 5;
    std::int64_t ablation_traj = 256;
    double toy_theta = 0.5;
  } diag;
};

enum class ValueType { integer, unsigned_integer, real, boolean, text };

struct KeyInfo {
  std::string key;
  ValueType type;
};

/// All recognised dotted keys in canonical (sorted) order.
std::vector<KeyInfo> config_keys();

/// Sets one field from text; ConfigError on an unknown key or a value that
/// does not parse as the key's type.
void set_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& cfg, const std::string& key);

/// "key=value" form used by --set.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Reads an INI file ([section] / name = value) over the defaults. A missing
/// file is an IoError; unknown keys and bad values are ConfigErrors.
RunConfig load_config(const std::filesystem::path& path);

/// Range and consistency checks; ConfigError naming the key.
void validate(const RunConfig& cfg);

/// Sorted key=value lines; independent of the order fields were set in.
std::string canonical_text(const RunConfig& cfg);

/// Hex SHA-256 of canonical_text.
std::string config_hash(const RunConfig& cfg);

}  // namespace cgru::pipeline
