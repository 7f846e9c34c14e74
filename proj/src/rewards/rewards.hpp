// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "diffusion/dataset.hpp"
#include "diffusion/types.hpp"
#include "numerics/network.hpp"

namespace cgru::rewards {

using diffusion::LabeledData;
using diffusion::Trajectory;
using numerics::Network;
using numerics::Tensor;

enum class RewardKind { classifier_complement, mode_distance };

RewardKind parse_reward_kind(const std::string& name);
std::string to_string(RewardKind kind);

struct RewardSpec {
  RewardKind kind = RewardKind::classifier_complement;
  std::optional<int> target_class = 0;
  double scale = 10.0;
  std::array<double, 2> center{0.0, 0.0};  // mode_distance only

  void validate() const;
};

struct ClassifierTraining {
  std::size_t hidden = 64;
  int epochs = 30;
  std::size_t batch = 128;
  double lr = 1e-3;
};

/// 2 -> hidden -> hidden -> K, tanh hidden layers, softmax head.
std::vector<numerics::LayerSpec> classifier_arch(int num_classes, std::size_t hidden);

/// Cross-entropy training with Adam; throws UsageError on single-class data.
Network train_classifier(const LabeledData& data, const ClassifierTraining& cfg, Rng& rng);

Tensor class_probabilities(const Network& clf, const Tensor& points);
std::vector<int> predict_classes(const Network& clf, const Tensor& points);
double accuracy(const Network& clf, const LabeledData& data);

/// Activations feeding the classifier's output layer.
Tensor penultimate_features(const Network& clf, const Tensor& points);

/// scale * (1 - p_target).
double complement_reward(double p_target, double scale);
double classifier_reward(const Network& clf, std::span<const double> x0, int target, double scale);

/// scale * exp(-|x0 - center|^2).
double mode_distance_reward(std::span<const double> x0, std::span<const double> center, double scale);

/// Terminal rewards for a batch of samples (rows of x0) under spec.
std::vector<double> evaluate_rewards(const RewardSpec& spec, const Network* clf, const Tensor& x0);

/// Sets each trajectory's reward from its x_0. Throws UsageError when the
/// spec needs a classifier and none is given.
std::vector<Trajectory> assign_rewards(std::vector<Trajectory> trajs, const RewardSpec& spec, const Network* clf);

}  // namespace cgru::rewards
