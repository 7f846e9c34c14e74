// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "common/errors.hpp"
#include "diffusion/dataset.hpp"
#include "rewards/rewards.hpp"

using namespace cgru;
using namespace cgru::rewards;

TEST_SUITE("rewards") {
  TEST_CASE("complement reward endpoints") {
    CHECK(complement_reward(1.0, 10.0) == 0.0);
    CHECK(complement_reward(0.0, 10.0) == 10.0);
    CHECK(complement_reward(0.25, 10.0) == doctest::Approx(7.5));
  }

  TEST_CASE("mode distance reward") {
    const std::vector<double> c{4.0, 0.0};
    CHECK(mode_distance_reward(std::vector<double>{4.0, 0.0}, c, 10.0) == doctest::Approx(10.0));
    CHECK(mode_distance_reward(std::vector<double>{5.0, 1.0}, c, 10.0) == doctest::Approx(10.0 * std::exp(-2.0)));
    CHECK(mode_distance_reward(std::vector<double>{14.0, 0.0}, c, 10.0) < 1e-40 * 10.0);
  }

  TEST_CASE("reward kind names round trip") {
    CHECK(parse_reward_kind(to_string(RewardKind::mode_distance)) == RewardKind::mode_distance);
    CHECK(parse_reward_kind("classifier_complement") == RewardKind::classifier_complement);
    CHECK_THROWS(parse_reward_kind("sparkle"));
  }

  TEST_CASE("classifier separates the mixture and the reward tracks its probabilities") {
    diffusion::MixtureSpec m;
    Rng rng(21);
    const auto train = diffusion::sample_dataset(m, 3000, rng);
    const auto test = diffusion::sample_dataset(m, 800, rng);
    ClassifierTraining cfg;
    cfg.hidden = 32;
    cfg.epochs = 15;
    Rng trng(22);
    const auto clf = train_classifier(train, cfg, trng);
    // Modes are 3.06 apart with stddev 0.3, so the Bayes error is negligible.
    CHECK(accuracy(clf, test) > 0.97);

    const auto probs = class_probabilities(clf, test.points);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      double sum = 0;
      for (double p : probs.row_span(i)) sum += p;
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
    const auto r = evaluate_rewards(RewardSpec{}, &clf, test.points);
    for (std::size_t i = 0; i < 20; ++i) CHECK(r[i] == doctest::Approx(10.0 * (1.0 - probs(i, 0))).epsilon(1e-12));

    const auto centre = numerics::Tensor::row({4.0, 0.0});
    CHECK(classifier_reward(clf, centre.row_span(0), 0, 10.0) < 1.0);
    CHECK(predict_classes(clf, centre)[0] == 0);
  }

  TEST_CASE("classifier reward without a classifier is a usage error") {
    std::vector<diffusion::Trajectory> trajs(1);
    trajs[0].T = 1;
    trajs[0].dim = 2;
    trajs[0].latents = {0, 0, 0, 0};
    CHECK_THROWS_AS(assign_rewards(trajs, RewardSpec{}, nullptr), UsageError);
    RewardSpec md;
    md.kind = RewardKind::mode_distance;
    md.center = {0.0, 0.0};
    const auto scored = assign_rewards(trajs, md, nullptr);
    CHECK(*scored[0].reward == doctest::Approx(10.0));
  }

  TEST_CASE("single-class data cannot train a classifier") {
    diffusion::LabeledData d;
    d.points = numerics::Tensor::matrix(4, 2, 1.0);
    d.labels = {2, 2, 2, 2};
    d.num_classes = 8;
    Rng rng(1);
    CHECK_THROWS_AS(train_classifier(d, ClassifierTraining{}, rng), UsageError);
  }
}
