// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <variant>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "common/errors.hpp"
#include "pipeline/artifacts.hpp"
#include "rewards/rewards.hpp"

namespace cgru::pipeline {

namespace {

using FieldRef = std::variant<int*, std::int64_t*, std::uint64_t*, double*, bool*, std::string*>;

struct Binding {
  ValueType type;
  std::function<FieldRef(RunConfig&)> ref;
};

template <typename T>
ValueType type_of() {
  if constexpr (std::is_same_v<T, bool>) return ValueType::boolean;
  else if constexpr (std::is_same_v<T, std::uint64_t>) return ValueType::unsigned_integer;
  else if constexpr (std::is_integral_v<T>) return ValueType::integer;
  else if constexpr (std::is_floating_point_v<T>) return ValueType::real;
  else return ValueType::text;
}

template <typename Get>
Binding bind(Get get) {
  using T = std::remove_reference_t<decltype(get(std::declval<RunConfig&>()))>;
  return {type_of<T>(), [get](RunConfig& c) -> FieldRef { return &get(c); }};
}

#define CGRU_KEY(name, expr) {name, bind([](RunConfig& c) -> auto& { return c.expr; })}

const std::map<std::string, Binding>& registry() {
  static const std::map<std::string, Binding> table = {
      CGRU_KEY("seed", seed),
      CGRU_KEY("diffusion.T", diffusion.T),
      CGRU_KEY("diffusion.beta_start", diffusion.beta_start),
      CGRU_KEY("diffusion.beta_end", diffusion.beta_end),
      CGRU_KEY("data.K", data.K),
      CGRU_KEY("data.radius", data.radius),
      CGRU_KEY("data.stddev", data.stddev),
      CGRU_KEY("data.n_train", data.n_train),
      CGRU_KEY("net.eps_hidden", net.eps_hidden),
      CGRU_KEY("net.eps_embed", net.eps_embed),
      CGRU_KEY("net.critic_hidden", net.critic_hidden),
      CGRU_KEY("net.critic_embed", net.critic_embed),
      CGRU_KEY("net.clf_hidden", net.clf_hidden),
      CGRU_KEY("classifier.epochs", classifier.epochs),
      CGRU_KEY("classifier.batch", classifier.batch),
      CGRU_KEY("classifier.lr", classifier.lr),
      CGRU_KEY("pretrain.steps", pretrain.steps),
      CGRU_KEY("pretrain.batch", pretrain.batch),
      CGRU_KEY("pretrain.lr", pretrain.lr),
      CGRU_KEY("pretrain.eval_every", pretrain.eval_every),
      CGRU_KEY("pretrain.eval_per_class", pretrain.eval_per_class),
      CGRU_KEY("pretrain.target_acc", pretrain.target_acc),
      CGRU_KEY("reward.kind", reward.kind),
      CGRU_KEY("reward.target_class", reward.target_class),
      CGRU_KEY("reward.scale", reward.scale),
      CGRU_KEY("reward.forget_fraction", reward.forget_fraction),
      CGRU_KEY("reward.center_x", reward.center_x),
      CGRU_KEY("reward.center_y", reward.center_y),
      CGRU_KEY("critic.n_traj", critic.n_traj),
      CGRU_KEY("critic.epochs", critic.epochs),
      CGRU_KEY("critic.batch", critic.batch),
      CGRU_KEY("critic.lr", critic.lr),
      CGRU_KEY("policy.iterations", policy.iterations),
      CGRU_KEY("policy.traj_per_iter", policy.traj_per_iter),
      CGRU_KEY("policy.batch", policy.batch),
      CGRU_KEY("policy.grad_accum", policy.grad_accum),
      CGRU_KEY("policy.lr", policy.lr),
      CGRU_KEY("policy.inner_epochs", policy.inner_epochs),
      CGRU_KEY("estimator.is_clip_low", estimator.is_clip_low),
      CGRU_KEY("estimator.is_clip_high", estimator.is_clip_high),
      CGRU_KEY("estimator.grad_max_norm", estimator.grad_max_norm),
      CGRU_KEY("estimator.normalize_advantages", estimator.normalize_advantages),
      CGRU_KEY("eval.seed", eval.seed),
      CGRU_KEY("eval.n_forget", eval.n_forget),
      CGRU_KEY("eval.n_retain", eval.n_retain),
      CGRU_KEY("eval.monitor_every", eval.monitor_every),
      CGRU_KEY("eval.monitor_forget", eval.monitor_forget),
      CGRU_KEY("eval.monitor_retain", eval.monitor_retain),
      CGRU_KEY("eval.fd_features", eval.fd_features),
      CGRU_KEY("pipeline.compare_ddpo", pipeline.compare_ddpo),
      CGRU_KEY("diag.batches", diag.batches),
      CGRU_KEY("diag.batch_traj", diag.batch_traj),
      CGRU_KEY("diag.bootstrap", diag.bootstrap),
      CGRU_KEY("diag.n_max", diag.n_max),
      CGRU_KEY("diag.probe_states", diag.probe_states),
      CGRU_KEY("diag.rollouts", diag.rollouts),
      CGRU_KEY("diag.ablation_seeds", diag.ablation_seeds),
      CGRU_KEY("diag.ablation_traj", diag.ablation_traj),
      CGRU_KEY("diag.toy_theta", diag.toy_theta),
  };
  return table;
}

#undef CGRU_KEY

const Binding& lookup(const std::string& key) {
  auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text, const char* what) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError(fmt::format("config key '{}': expected {}, got '{}'", key, what, text));
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError(fmt::format("config key '{}': value must be finite", key));
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(fmt::format("config key '{}': expected true or false, got '{}'", key, text));
}

void require(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw ConfigError(fmt::format("config key '{}': {}", key, rule));
}

}  // namespace

std::vector<KeyInfo> config_keys() {
  std::vector<KeyInfo> keys;
  for (const auto& [k, b] : registry()) keys.push_back({k, b.type});
  return keys;
}

void set_value(RunConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  std::visit(
      [&](auto* field) {
        using T = std::remove_pointer_t<decltype(field)>;
        if constexpr (std::is_same_v<T, bool>) *field = parse_bool(key, value);
        else if constexpr (std::is_same_v<T, std::string>) *field = value;
        else if constexpr (std::is_same_v<T, double>) *field = parse_number<double>(key, value, "a real number");
        else if constexpr (std::is_same_v<T, std::uint64_t>)
          *field = parse_number<std::uint64_t>(key, value, "a non-negative integer");
        else *field = parse_number<T>(key, value, "an integer");
      },
      lookup(key).ref(cfg));
}

std::string get_value(const RunConfig& cfg, const std::string& key) {
  auto& mutable_cfg = const_cast<RunConfig&>(cfg);  // reference only read
  return std::visit(
      [](auto* field) -> std::string {
        using T = std::remove_pointer_t<decltype(field)>;
        if constexpr (std::is_same_v<T, bool>) return *field ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return *field;
        else if constexpr (std::is_same_v<T, double>) return fmt::format("{:.17g}", *field);
        else return std::to_string(*field);
      },
      lookup(key).ref(mutable_cfg));
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("malformed override '" + assignment + "' (expected key=value)");
  set_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig cfg;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      set_value(cfg, name, node.data());
      continue;
    }
    for (const auto& [sub, leaf] : node) {
      if (!leaf.empty()) throw ConfigError(path.string() + ": nested sections are not supported");
      set_value(cfg, name + "." + sub, leaf.data());
    }
  }
  return cfg;
}

void validate(const RunConfig& c) {
  require(c.diffusion.T >= 1, "diffusion.T", "must be at least 1");
  require(c.diffusion.beta_start > 0.0 && c.diffusion.beta_start < 1.0, "diffusion.beta_start", "must be in (0, 1)");
  require(c.diffusion.beta_end >= c.diffusion.beta_start && c.diffusion.beta_end < 1.0, "diffusion.beta_end",
          "must be in [beta_start, 1)");
  require(c.data.K >= 2, "data.K", "must be at least 2");
  require(c.data.radius > 0.0, "data.radius", "must be positive");
  require(c.data.stddev > 0.0, "data.stddev", "must be positive");
  require(c.data.n_train >= c.data.K, "data.n_train", "must be at least data.K");
  for (auto [k, v] : {std::pair{"net.eps_hidden", c.net.eps_hidden}, {"net.critic_hidden", c.net.critic_hidden},
                      {"net.clf_hidden", c.net.clf_hidden}, {"classifier.batch", c.classifier.batch},
                      {"pretrain.batch", c.pretrain.batch}, {"pretrain.eval_every", c.pretrain.eval_every},
                      {"pretrain.eval_per_class", c.pretrain.eval_per_class}, {"critic.n_traj", c.critic.n_traj},
                      {"critic.batch", c.critic.batch}, {"policy.traj_per_iter", c.policy.traj_per_iter},
                      {"policy.batch", c.policy.batch}, {"policy.grad_accum", c.policy.grad_accum},
                      {"eval.n_forget", c.eval.n_forget}, {"eval.n_retain", c.eval.n_retain},
                      {"eval.monitor_every", c.eval.monitor_every}, {"eval.monitor_forget", c.eval.monitor_forget},
                      {"eval.monitor_retain", c.eval.monitor_retain}, {"diag.batch_traj", c.diag.batch_traj},
                      {"diag.bootstrap", c.diag.bootstrap}, {"diag.probe_states", c.diag.probe_states},
                      {"diag.rollouts", c.diag.rollouts}, {"diag.ablation_seeds", c.diag.ablation_seeds}})
    require(v >= 1, k, "must be at least 1");
  for (auto [k, v] : {std::pair{"net.eps_embed", c.net.eps_embed}, {"net.critic_embed", c.net.critic_embed}})
    require(v >= 2 && v % 2 == 0, k, "must be a positive even number");
  require(c.pretrain.steps >= 0, "pretrain.steps", "must be non-negative");
  require(c.classifier.epochs >= 1, "classifier.epochs", "must be at least 1");
  require(c.critic.epochs >= 1, "critic.epochs", "must be at least 1");
  require(c.policy.iterations >= 0, "policy.iterations", "must be non-negative");
  require(c.policy.inner_epochs >= 1, "policy.inner_epochs", "must be at least 1");
  require(c.policy.grad_accum <= c.diffusion.T, "policy.grad_accum", "must not exceed diffusion.T");
  require(c.diag.batches >= 2, "diag.batches", "must be at least 2");
  require(c.diag.n_max >= 100, "diag.n_max", "must be at least 100");
  require(c.diag.ablation_traj >= 5, "diag.ablation_traj", "must be at least 5");
  for (auto [k, v] : {std::pair{"classifier.lr", c.classifier.lr}, {"pretrain.lr", c.pretrain.lr},
                      {"critic.lr", c.critic.lr}, {"policy.lr", c.policy.lr}})
    require(v > 0.0, k, "must be positive");
  require(c.pretrain.target_acc >= 0.0 && c.pretrain.target_acc <= 1.0, "pretrain.target_acc", "must be in [0, 1]");
  try {
    rewards::parse_reward_kind(c.reward.kind);
  } catch (const Error& e) {
    throw ConfigError(std::string("config key 'reward.kind': ") + e.what());
  }
  require(c.reward.target_class >= 0 && c.reward.target_class < c.data.K, "reward.target_class",
          "must be a class id below data.K");
  require(c.reward.scale > 0.0, "reward.scale", "must be positive");
  require(c.reward.forget_fraction >= 0.0 && c.reward.forget_fraction <= 1.0, "reward.forget_fraction",
          "must be in [0, 1]");
  require(c.estimator.is_clip_low > 0.0 && c.estimator.is_clip_low <= 1.0, "estimator.is_clip_low",
          "must be in (0, 1]");
  require(c.estimator.is_clip_high >= 1.0, "estimator.is_clip_high", "must be at least 1");
  require(c.estimator.grad_max_norm > 0.0, "estimator.grad_max_norm", "must be positive");
  require(c.eval.fd_features == "raw" || c.eval.fd_features == "penultimate", "eval.fd_features",
          "must be raw or penultimate");
}

std::string canonical_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, binding] : registry()) out += key + "=" + get_value(cfg, key) + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(canonical_text(cfg)); }

}  // namespace cgru::pipeline
