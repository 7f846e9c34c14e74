// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "common/errors.hpp"
#include "diffusion/sampler.hpp"
#include "diffusion/train.hpp"
#include "numerics/adam.hpp"
#include "numerics/checkpoint.hpp"

namespace cgru::pipeline {

using diffusion::Context;
using numerics::Network;
using numerics::Tensor;

Method parse_method(const std::string& name) {
  if (name == "cgru") return Method::cgru;
  if (name == "ddpo") return Method::ddpo;
  throw UsageError("unknown method '" + name + "' (expected cgru or ddpo)");
}

std::string to_string(Method m) { return m == Method::cgru ? "cgru" : "ddpo"; }

namespace artifact {
std::string unlearned(Method m) { return "eps_unlearned_" + to_string(m) + ".ckpt"; }
std::string policy_log(Method m) { return "policy_" + to_string(m) + ".csv"; }
std::string monitor(Method m) { return "metrics_" + to_string(m) + ".csv"; }
std::string eval(const std::string& label) { return "eval_" + label + ".csv"; }
}  // namespace artifact

namespace {

RunConfig validated(RunConfig cfg) {
  validate(cfg);
  return cfg;
}

Network load_checked(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw PhaseError(what + " checkpoint not found: " + path.string());
  return numerics::load_network(path);
}

std::vector<int> forget_retain_classes(const RunConfig& cfg, std::size_t n_forget, std::size_t n_retain) {
  std::vector<int> classes(n_forget, cfg.reward.target_class);
  for (int c = 0; c < cfg.data.K; ++c)
    if (c != cfg.reward.target_class) classes.insert(classes.end(), n_retain, c);
  return classes;
}

Tensor rows_of(const Tensor& all, std::size_t first, std::size_t n) {
  Tensor out = Tensor::matrix(n, all.cols());
  std::copy_n(all.data() + first * all.cols(), n * all.cols(), out.data());
  return out;
}

Tensor fd_features(const RunConfig& cfg, const Network& clf, const Tensor& points) {
  return cfg.eval.fd_features == "penultimate" ? rewards::penultimate_features(clf, points) : points;
}

std::vector<double> per_class_accuracy(const RunConfig& cfg, const Network& eps, const Network& clf,
                                       std::size_t per_class, std::uint64_t first_index) {
  const auto sched = schedule_of(cfg);
  diffusion::DiffusionPolicy policy(eps, denoiser_spec(cfg), sched);
  std::vector<int> classes;
  for (int c = 0; c < cfg.data.K; ++c) classes.insert(classes.end(), per_class, c);
  Tensor x0 = diffusion::generate(policy, classes, cfg.eval.seed, first_index);
  auto pred = rewards::predict_classes(clf, x0);
  std::vector<double> acc(static_cast<std::size_t>(cfg.data.K), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == classes[i]) acc[static_cast<std::size_t>(classes[i])] += 1.0;
  for (double& a : acc) a /= static_cast<double>(per_class);
  return acc;
}

}  // namespace

Workspace::Workspace(RunConfig cfg, fs::path out)
    : cfg_(validated(std::move(cfg))), dir_(std::move(out)), lock_(dir_), manifest_(RunManifest::load_or_empty(dir_)) {
  const std::string hash = config_hash(cfg_);
  if (manifest_.config_hash != hash) manifest_ = RunManifest{};
  manifest_.config_hash = hash;
  write_text(path(artifact::resolved_config), canonical_text(cfg_));
  record(artifact::resolved_config);
}

void Workspace::record(const std::string& name) {
  manifest_.record_artifact(dir_, name);
  manifest_.save(dir_);
}

void Workspace::phase(const std::string& name, const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  try {
    body();
  } catch (const std::exception& e) {
    manifest_.phases[name] = {"failed", seconds(), e.what()};
    manifest_.save(dir_);
    throw;
  }
  manifest_.phases[name] = {"ok", seconds(), ""};
  manifest_.save(dir_);
}

diffusion::NoiseSchedule schedule_of(const RunConfig& cfg) {
  return diffusion::make_schedule(cfg.diffusion.T, cfg.diffusion.beta_start, cfg.diffusion.beta_end);
}

diffusion::DenoiserSpec denoiser_spec(const RunConfig& cfg) {
  diffusion::DenoiserSpec s;
  s.dim = 2;
  s.num_classes = cfg.data.K;
  s.embed_dim = static_cast<int>(cfg.net.eps_embed);
  s.hidden = static_cast<std::size_t>(cfg.net.eps_hidden);
  s.T = cfg.diffusion.T;
  return s;
}

critic::CriticSpec critic_spec(const RunConfig& cfg) {
  critic::CriticSpec s;
  s.dim = 2;
  s.num_classes = cfg.data.K;
  s.hidden = static_cast<std::size_t>(cfg.net.critic_hidden);
  s.embed_dim = static_cast<int>(cfg.net.critic_embed);
  s.T = cfg.diffusion.T;
  return s;
}

rewards::RewardSpec reward_spec(const RunConfig& cfg) {
  rewards::RewardSpec s;
  s.kind = rewards::parse_reward_kind(cfg.reward.kind);
  s.target_class = cfg.reward.target_class;
  s.scale = cfg.reward.scale;
  s.center = {cfg.reward.center_x, cfg.reward.center_y};
  s.validate();
  return s;
}

diffusion::MixtureSpec mixture_spec(const RunConfig& cfg) {
  diffusion::MixtureSpec s;
  s.num_classes = cfg.data.K;
  s.radius = cfg.data.radius;
  s.stddev = cfg.data.stddev;
  return s;
}

policy_grad::EstimatorConfig estimator_config(const RunConfig& cfg) {
  policy_grad::EstimatorConfig e;
  e.is_clip_low = cfg.estimator.is_clip_low;
  e.is_clip_high = cfg.estimator.is_clip_high;
  e.grad_max_norm = cfg.estimator.grad_max_norm;
  e.normalize_advantages = cfg.estimator.normalize_advantages;
  e.validate();
  return e;
}

diffusion::LabeledData training_data(const RunConfig& cfg) {
  Rng rng(cfg.seed, StreamTag::dataset);
  return diffusion::sample_dataset(mixture_spec(cfg), static_cast<std::size_t>(cfg.data.n_train), rng);
}

std::vector<Context> mixture_contexts(const RunConfig& cfg, std::size_t n, Rng& rng) {
  const int K = cfg.data.K, target = cfg.reward.target_class;
  const auto n_forget = static_cast<std::size_t>(std::llround(cfg.reward.forget_fraction * static_cast<double>(n)));
  std::vector<Context> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n_forget; ++i) out.emplace_back(target, K);
  for (std::size_t i = n_forget; i < n; ++i) {
    int c = static_cast<int>(rng.below(static_cast<std::size_t>(K - 1)));
    if (c >= target) ++c;
    out.emplace_back(c, K);
  }
  rng.shuffle(std::span(out));
  return out;
}

Evaluation evaluate_model(const RunConfig& cfg, const Network& eps, const Network& clf, std::size_t n_forget,
                          std::size_t n_retain) {
  const auto sched = schedule_of(cfg);
  diffusion::DiffusionPolicy policy(eps, denoiser_spec(cfg), sched);
  const auto classes = forget_retain_classes(cfg, n_forget, n_retain);
  const Tensor x0 = diffusion::generate(policy, classes, cfg.eval.seed, 0);

  Evaluation ev;
  const Tensor forget = rows_of(x0, 0, n_forget);
  ev.report.ua = metrics::unlearning_accuracy(forget, clf, cfg.reward.target_class);
  std::map<int, Tensor> retain;
  for (int c = 0, k = 0; c < cfg.data.K; ++c) {
    if (c == cfg.reward.target_class) continue;
    retain[c] = rows_of(x0, n_forget + static_cast<std::size_t>(k++) * n_retain, n_retain);
  }
  ev.report.ira = metrics::retain_accuracy(retain, clf, &ev.report.per_class_acc);

  const Tensor retain_all = rows_of(x0, n_forget, x0.rows() - n_forget);
  const auto data = training_data(cfg);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] != cfg.reward.target_class) idx.push_back(i);
  const auto ref = data.subset(idx);
  ev.report.fd = metrics::frechet_distance(metrics::feature_stats(fd_features(cfg, clf, ref.points)),
                                           metrics::feature_stats(fd_features(cfg, clf, retain_all)));

  const auto rspec = reward_spec(cfg);
  const auto r = rewards::evaluate_rewards(rspec, &clf, x0);
  const double f = cfg.reward.forget_fraction;
  const double r_forget = std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(n_forget), 0.0) /
                          static_cast<double>(n_forget);
  const double r_retain = std::accumulate(r.begin() + static_cast<std::ptrdiff_t>(n_forget), r.end(), 0.0) /
                          static_cast<double>(r.size() - n_forget);
  ev.mean_reward = f * r_forget + (1.0 - f) * r_retain;
  return ev;
}

void run_classifier(Workspace& ws) {
  ws.phase("classifier", [&] {
    const auto& cfg = ws.cfg();
    const auto data = training_data(cfg);
    CsvTable table({"x", "y", "class"});
    for (std::size_t i = 0; i < data.size(); ++i)
      table.row().add(data.points(i, 0)).add(data.points(i, 1)).add(data.labels[i]);
    table.write(ws.path(artifact::dataset));
    ws.record(artifact::dataset);

    rewards::ClassifierTraining tc;
    tc.hidden = static_cast<std::size_t>(cfg.net.clf_hidden);
    tc.epochs = cfg.classifier.epochs;
    tc.batch = static_cast<std::size_t>(cfg.classifier.batch);
    tc.lr = cfg.classifier.lr;
    Rng rng(cfg.seed, StreamTag::training, 1);
    const Network clf = rewards::train_classifier(data, tc, rng);
    numerics::save_network(clf, ws.path(artifact::classifier));
    ws.record(artifact::classifier);
  });
}

void run_pretrain(Workspace& ws) {
  if (!ws.has(artifact::classifier)) run_classifier(ws);
  ws.phase("pretrain", [&] {
    const auto& cfg = ws.cfg();
    const Network clf = load_checked(ws.path(artifact::classifier), "classifier");
    const auto data = training_data(cfg);
    const auto sched = schedule_of(cfg);
    const auto spec = denoiser_spec(cfg);
    Rng init(cfg.seed, StreamTag::init, 1);
    Network net = diffusion::make_denoiser(spec, init);
    auto adam = numerics::AdamState::for_network(net, cfg.pretrain.lr);
    Rng rng(cfg.seed, StreamTag::training, 2);

    CsvTable loss({"step", "loss"});
    CsvTable evals({"step", "class", "accuracy"});
    const auto batch = static_cast<std::size_t>(cfg.pretrain.batch);
    std::vector<std::size_t> idx(batch);
    std::vector<double> acc;
    std::int64_t step = 0;
    auto evaluate = [&] {
      acc = per_class_accuracy(cfg, net, clf, static_cast<std::size_t>(cfg.pretrain.eval_per_class),
                               static_cast<std::uint64_t>(step) << 20);
      for (std::size_t c = 0; c < acc.size(); ++c) evals.row().add(static_cast<long long>(step)).add(c).add(acc[c]);
      return std::all_of(acc.begin(), acc.end(), [&](double a) { return a >= cfg.pretrain.target_acc; });
    };
    bool reached = false;
    while (step < cfg.pretrain.steps) {
      for (auto& i : idx) i = rng.below(data.size());
      const auto ts = diffusion::ddpm_train_step(net, spec, data.subset(idx), sched, rng);
      numerics::adam_step(adam, net, ts.grads);
      ++step;
      loss.row().add(static_cast<long long>(step)).add(ts.loss);
      if (step % cfg.pretrain.eval_every == 0 && (reached = evaluate())) break;
    }
    if (step % cfg.pretrain.eval_every != 0 || step == 0) reached = evaluate();

    loss.write(ws.path(artifact::pretrain_loss));
    evals.write(ws.path(artifact::pretrain_eval));
    numerics::save_network(net, ws.path(artifact::base));
    ws.record(artifact::pretrain_loss);
    ws.record(artifact::pretrain_eval);
    ws.record(artifact::base);
    if (!reached) {
      std::string detail;
      for (std::size_t c = 0; c < acc.size(); ++c) detail += fmt::format(" {}:{:.3f}", c, acc[c]);
      throw PhaseError(fmt::format("pretraining budget exhausted below per-class accuracy {} (per-class:{})",
                                   cfg.pretrain.target_acc, detail));
    }
  });
}

void run_critic(Workspace& ws) {
  ws.phase("critic", [&] {
    const auto& cfg = ws.cfg();
    const Network eps = load_checked(ws.path(artifact::base), "base model");
    const Network clf = load_checked(ws.path(artifact::classifier), "classifier");
    const auto sched = schedule_of(cfg);
    diffusion::DiffusionPolicy policy(eps, denoiser_spec(cfg), sched);
    const auto n = static_cast<std::size_t>(cfg.critic.n_traj);
    Rng ctx_rng(cfg.seed, StreamTag::contexts, 1ULL << 32);
    const auto prompts = mixture_contexts(cfg, n, ctx_rng);
    Rng buf_rng(cfg.seed, StreamTag::shuffle, 1ULL << 32);
    auto buffer = critic::build_critic_buffer(policy, prompts, reward_spec(cfg), &clf, n, cfg.seed, buf_rng);

    Rng init(cfg.seed, StreamTag::init, 2);
    auto model = critic::Critic::initialized(critic_spec(cfg), init);
    critic::CriticTraining tc{cfg.critic.epochs, static_cast<std::size_t>(cfg.critic.batch), cfg.critic.lr};
    Rng train_rng(cfg.seed, StreamTag::training, 3);
    const auto history = critic::critic_train(model, std::move(buffer), tc, train_rng);

    CsvTable loss({"epoch", "loss"});
    for (std::size_t e = 0; e < history.size(); ++e) loss.row().add(e + 1).add(history[e]);
    loss.write(ws.path(artifact::critic_loss));
    numerics::save_network(model.network(), ws.path(artifact::critic));
    ws.record(artifact::critic_loss);
    ws.record(artifact::critic);
  });
}

void run_unlearn(Workspace& ws, Method method, const UnlearnInputs& inputs) {
  ws.phase("unlearn_" + to_string(method), [&] {
    const auto& cfg = ws.cfg();
    const fs::path base_path = inputs.base.value_or(ws.path(artifact::base));
    const fs::path clf_path = inputs.classifier.value_or(ws.path(artifact::classifier));
    const fs::path critic_path = inputs.critic.value_or(ws.path(artifact::critic));
    std::string missing;
    auto need = [&](const fs::path& p, const std::string& what) {
      if (!fs::exists(p)) missing += fmt::format("{}{} checkpoint not found: {}", missing.empty() ? "" : "; ", what, p.string());
    };
    need(base_path, "base model");
    need(clf_path, "classifier");
    if (method == Method::cgru) need(critic_path, "critic");
    if (!missing.empty()) throw PhaseError(missing);

    Network net = load_checked(base_path, "base model");
    const auto spec = denoiser_spec(cfg);
    diffusion::check_denoiser(net, spec);
    const Network clf = load_checked(clf_path, "classifier");
    std::optional<critic::Critic> value_model;
    if (method == Method::cgru) value_model.emplace(load_checked(critic_path, "critic"), critic_spec(cfg));

    const auto sched = schedule_of(cfg);
    diffusion::DiffusionPolicy policy(net, spec, sched);
    const auto rspec = reward_spec(cfg);
    const auto ecfg = estimator_config(cfg);
    std::unique_ptr<policy_grad::Baseline> baseline;
    if (value_model)
      baseline = std::make_unique<policy_grad::CriticBaseline>(*value_model);
    else
      baseline = std::make_unique<policy_grad::ConstantBaseline>(0.0);
    const policy_grad::UpdateOptions opts{static_cast<std::size_t>(cfg.policy.batch),
                                          static_cast<std::size_t>(cfg.policy.grad_accum)};
    auto adam = numerics::AdamState::for_network(net, cfg.policy.lr);
    const auto n = static_cast<std::size_t>(cfg.policy.traj_per_iter);
    const std::string method_name = to_string(method);

    CsvTable log({"iteration", "estimator", "n_traj", "grad_norm", "grad_variance", "clip_count", "mean_reward"});
    CsvTable monitor({"run_id", "method", "epoch", "ua", "ira", "fd"});
    for (int it = 0; it < cfg.policy.iterations; ++it) {
      Rng ctx_rng(cfg.seed, StreamTag::contexts, static_cast<std::uint64_t>(it));
      const auto contexts = mixture_contexts(cfg, n, ctx_rng);
      auto trajs = rewards::assign_rewards(
          diffusion::sample_trajectories(policy, contexts, cfg.seed, static_cast<std::uint64_t>(it) * n), rspec, &clf);
      policy_grad::compute_advantages(std::span(trajs), *baseline);

      double mean_reward = 0.0;
      for (const auto& tr : trajs) mean_reward += *tr.reward / static_cast<double>(n);
      double grad_norm = 0.0, grad_var = 0.0;
      const auto per_traj = policy_grad::per_trajectory_estimates(trajs, policy, policy_grad::EstimatorKind::cgru);
      if (per_traj.size() >= 2) grad_var = policy_grad::gradient_variance(per_traj);
      std::vector<double> mean_grad(per_traj.front().grad.size(), 0.0);
      for (const auto& e : per_traj)
        for (std::size_t j = 0; j < mean_grad.size(); ++j) mean_grad[j] += e.grad[j] / static_cast<double>(n);
      grad_norm = std::sqrt(std::inner_product(mean_grad.begin(), mean_grad.end(), mean_grad.begin(), 0.0));

      std::size_t clips = 0;
      for (int e = 0; e < cfg.policy.inner_epochs; ++e) {
        Rng shuffle(cfg.seed, StreamTag::shuffle,
                    static_cast<std::uint64_t>(it) * static_cast<std::uint64_t>(cfg.policy.inner_epochs) +
                        static_cast<std::uint64_t>(e));
        const auto stats = policy_grad::policy_update_epoch(net, policy, std::span(trajs), *baseline, ecfg, opts,
                                                            adam, shuffle);
        clips += stats.clip_count;
        if (stats.stale)
          fmt::print(stderr, "warning: {} iteration {} epoch {}: {} of {} importance weights clipped (stale buffer)\n",
                     method_name, it, e, stats.clip_count, stats.weight_count);
      }
      log.row()
          .add(it)
          .add(method_name)
          .add(n)
          .add(grad_norm)
          .add(grad_var)
          .add(clips)
          .add(mean_reward);
      if ((it + 1) % cfg.eval.monitor_every == 0 || it + 1 == cfg.policy.iterations) {
        const auto ev = evaluate_model(cfg, net, clf, static_cast<std::size_t>(cfg.eval.monitor_forget),
                                       static_cast<std::size_t>(cfg.eval.monitor_retain));
        monitor.row().add(ws.run_id()).add(method_name).add(it + 1).add(ev.report.ua).add(ev.report.ira).add(ev.report.fd);
      }
    }
    log.write(ws.path(artifact::policy_log(method)));
    monitor.write(ws.path(artifact::monitor(method)));
    numerics::save_network(net, ws.path(artifact::unlearned(method)));
    ws.record(artifact::policy_log(method));
    ws.record(artifact::monitor(method));
    ws.record(artifact::unlearned(method));
  });
}

Evaluation run_eval(Workspace& ws, const std::string& label) {
  Evaluation ev;
  ws.phase("eval_" + label, [&] {
    const auto& cfg = ws.cfg();
    const std::string model = label == "base" ? artifact::base : artifact::unlearned(parse_method(label));
    const Network eps = load_checked(ws.path(model), label + " model");
    diffusion::check_denoiser(eps, denoiser_spec(cfg));
    const Network clf = load_checked(ws.path(artifact::classifier), "classifier");
    ev = evaluate_model(cfg, eps, clf, static_cast<std::size_t>(cfg.eval.n_forget),
                        static_cast<std::size_t>(cfg.eval.n_retain));
    const int epoch = label == "base" ? 0 : cfg.policy.iterations;
    CsvTable table({"run_id", "method", "epoch", "ua", "ira", "fd", "mean_reward"});
    table.row().add(ws.run_id()).add(label).add(epoch).add(ev.report.ua).add(ev.report.ira).add(ev.report.fd).add(
        ev.mean_reward);
    table.write(ws.path(artifact::eval(label)));
    ws.record(artifact::eval(label));
  });
  return ev;
}

void ensure_prerequisites(Workspace& ws, bool need_critic) {
  if (!ws.has(artifact::classifier)) run_classifier(ws);
  if (!ws.has(artifact::base)) run_pretrain(ws);
  if (need_critic && !ws.has(artifact::critic)) run_critic(ws);
}

void run_full(Workspace& ws) {
  run_classifier(ws);
  run_pretrain(ws);
  run_critic(ws);
  run_eval(ws, "base");
  run_unlearn(ws, Method::cgru);
  run_eval(ws, "cgru");
  if (ws.cfg().pipeline.compare_ddpo) {
    run_unlearn(ws, Method::ddpo);
    run_eval(ws, "ddpo");
  }
}

std::string emit_report(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const char* label : {"base", "cgru", "ddpo"})
    if (fs::exists(dir / artifact::eval(label))) files.push_back(dir / artifact::eval(label));
  if (files.empty()) throw PhaseError("no evaluation results in " + dir.string() + " (missing " +
                                      (dir / artifact::eval("cgru")).string() + ")");
  CsvTable summary({"run_id", "method", "epoch", "ua", "ira", "fd", "mean_reward", "final_train_reward"});
  std::string text = fmt::format("{:<6} {:>6} {:>8} {:>8} {:>10} {:>12}\n", "method", "epoch", "UA", "IRA", "FD",
                                 "mean_reward");
  for (const auto& f : files) {
    const auto t = read_csv(f);
    if (t.rows.empty()) throw FormatError(f.string() + ": no rows");
    const auto& r = t.rows.front();
    const std::string method = r[t.column("method")];
    std::string final_train = "";
    if (method != "base") {
      const fs::path log = dir / artifact::policy_log(parse_method(method));
      if (!fs::exists(log)) throw PhaseError("missing metrics file " + log.string());
      const auto l = read_csv(log);
      if (!l.rows.empty()) final_train = l.rows.back()[l.column("mean_reward")];
    }
    summary.row();
    for (const char* col : {"run_id", "method", "epoch", "ua", "ira", "fd", "mean_reward"}) summary.add(r[t.column(col)]);
    summary.add(final_train);
    text += fmt::format("{:<6} {:>6} {:>8.4f} {:>8.4f} {:>10.5f} {:>12.4f}\n", method, r[t.column("epoch")],
                        std::stod(r[t.column("ua")]), std::stod(r[t.column("ira")]), std::stod(r[t.column("fd")]),
                        std::stod(r[t.column("mean_reward")]));
  }
  summary.write(dir / "summary.csv");
  return text;
}

}  // namespace cgru::pipeline
