// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "rewards/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "numerics/adam.hpp"

namespace cgru::rewards {

using numerics::LayerSpec;

RewardKind parse_reward_kind(const std::string& name) {
  if (name == "classifier_complement") return RewardKind::classifier_complement;
  if (name == "mode_distance") return RewardKind::mode_distance;
  throw UsageError("unknown reward kind '" + name + "'");
}

std::string to_string(RewardKind kind) {
  return kind == RewardKind::classifier_complement ? "classifier_complement" : "mode_distance";
}

void RewardSpec::validate() const {
  if (!(scale > 0.0)) throw UsageError("reward scale must be positive");
  if (kind == RewardKind::classifier_complement && !target_class)
    throw UsageError("classifier_complement reward needs a target class");
}

std::vector<LayerSpec> classifier_arch(int num_classes, std::size_t hidden) {
  return {LayerSpec::dense(2, hidden), LayerSpec::tanh(), LayerSpec::dense(hidden, hidden), LayerSpec::tanh(),
          LayerSpec::dense(hidden, static_cast<std::size_t>(num_classes)), LayerSpec::softmax()};
}

Network train_classifier(const LabeledData& data, const ClassifierTraining& cfg, Rng& rng) {
  std::set<int> present(data.labels.begin(), data.labels.end());
  if (present.size() < 2) throw UsageError("train_classifier: need at least two classes in the data");
  if (cfg.batch == 0 || cfg.epochs < 1) throw UsageError("train_classifier: epochs and batch must be positive");
  Network net = Network::initialized(classifier_arch(data.num_classes, cfg.hidden), rng);
  auto adam = numerics::AdamState::for_network(net, cfg.lr);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      LabeledData batch = data.subset(std::span(order).subspan(start, stop - start));
      auto trace = numerics::forward_trace(net, batch.points);
      Tensor g = Tensor::matrix(batch.size(), static_cast<std::size_t>(data.num_classes));
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t r = 0; r < batch.size(); ++r) {
        const auto y = static_cast<std::size_t>(batch.labels[r]);
        g(r, y) = -inv / std::max(trace.output(r, y), 1e-300);
      }
      numerics::adam_step(adam, net, numerics::backward(net, trace, g).param_grads);
    }
  }
  return net;
}

Tensor class_probabilities(const Network& clf, const Tensor& points) { return numerics::forward(clf, points); }

std::vector<int> predict_classes(const Network& clf, const Tensor& points) {
  Tensor p = class_probabilities(clf, points);
  std::vector<int> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto row = p.row_span(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy(const Network& clf, const LabeledData& data) {
  auto pred = predict_classes(clf, data.points);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

Tensor penultimate_features(const Network& clf, const Tensor& points) {
  auto trace = numerics::forward_trace(clf, points);
  const auto& arch = clf.arch();
  for (std::size_t i = arch.size(); i-- > 0;)
    if (arch[i].kind == numerics::LayerKind::dense) return trace.inputs[i];
  throw UsageError("classifier has no dense layer");
}

double complement_reward(double p_target, double scale) {
  return std::clamp(scale * (1.0 - p_target), 0.0, scale);
}

double classifier_reward(const Network& clf, std::span<const double> x0, int target, double scale) {
  if (target < 0 || static_cast<std::size_t>(target) >= clf.output_dim())
    throw UsageError("classifier_reward: class id " + std::to_string(target) + " out of range");
  Tensor p = class_probabilities(clf, Tensor::row({x0.begin(), x0.end()}));
  return complement_reward(p(0, static_cast<std::size_t>(target)), scale);
}

double mode_distance_reward(std::span<const double> x0, std::span<const double> center, double scale) {
  if (x0.size() != center.size()) throw ShapeError("mode_distance_reward: dimension mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) sq += (x0[i] - center[i]) * (x0[i] - center[i]);
  return scale * std::exp(-sq);
}

std::vector<double> evaluate_rewards(const RewardSpec& spec, const Network* clf, const Tensor& x0) {
  spec.validate();
  std::vector<double> r(x0.rows());
  if (spec.kind == RewardKind::classifier_complement) {
    if (clf == nullptr) throw UsageError("classifier_complement reward requires a classifier");
    const auto target = static_cast<std::size_t>(*spec.target_class);
    if (target >= clf->output_dim()) throw UsageError("reward target class out of range");
    Tensor p = class_probabilities(*clf, x0);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = complement_reward(p(i, target), spec.scale);
  } else {
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = mode_distance_reward(x0.row_span(i), spec.center, spec.scale);
  }
  return r;
}

std::vector<Trajectory> assign_rewards(std::vector<Trajectory> trajs, const RewardSpec& spec, const Network* clf) {
  if (trajs.empty()) return trajs;
  const std::size_t d = trajs.front().dim;
  Tensor x0 = Tensor::matrix(trajs.size(), d);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (trajs[i].latents.empty()) throw UsageError("trajectory has no terminal latent");
    std::copy(trajs[i].x0().begin(), trajs[i].x0().end(), x0.row_span(i).begin());
  }
  auto r = evaluate_rewards(spec, clf, x0);
  for (std::size_t i = 0; i < trajs.size(); ++i) trajs[i].reward = r[i];
  return trajs;
}

}  // namespace cgru::rewards
