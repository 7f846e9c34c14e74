// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "common/errors.hpp"
#include "diffusion/dataset.hpp"
#include "metrics/metrics.hpp"
#include "support/oracles.hpp"

using namespace cgru;
using namespace cgru::metrics;
using numerics::LayerSpec;
using numerics::Tensor;

namespace {

// Linear classifier whose logit for class k is the dot product with mode k's
// centre, so a point at a centre is assigned to that centre's class.
Network centre_classifier(int K) {
  diffusion::MixtureSpec m;
  m.num_classes = K;
  Network net({LayerSpec::dense(2, static_cast<std::size_t>(K)), LayerSpec::softmax()});
  auto& w = net.param("layer0.weight");
  for (int k = 0; k < K; ++k) {
    const auto c = m.center(k);
    w(0, k) = c[0];
    w(1, k) = c[1];
  }
  return net;
}

Tensor at_centre(int cls, std::size_t n, int K = 8) {
  diffusion::MixtureSpec m;
  m.num_classes = K;
  const auto c = m.center(cls);
  Tensor t = Tensor::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    t(i, 0) = c[0];
    t(i, 1) = c[1];
  }
  return t;
}

Tensor stack(const Tensor& a, const Tensor& b) {
  std::vector<double> d = a.storage();
  d.insert(d.end(), b.storage().begin(), b.storage().end());
  return Tensor({a.rows() + b.rows(), 2}, d);
}

FeatureStats stats_of(Eigen::VectorXd mu, Eigen::MatrixXd cov) { return {std::move(mu), std::move(cov), 100}; }

Eigen::MatrixXd random_spd(Rng& rng, int d) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("unlearning accuracy endpoints and arithmetic") {
    const auto clf = centre_classifier(8);
    CHECK(unlearning_accuracy(at_centre(0, 10), clf, 0) == 0.0);
    CHECK(unlearning_accuracy(at_centre(3, 10), clf, 0) == 1.0);
    CHECK(unlearning_accuracy(stack(at_centre(0, 9), at_centre(5, 191)), clf, 0) == doctest::Approx(0.955));
    CHECK_THROWS(unlearning_accuracy(Tensor::matrix(0, 2), clf, 0));
  }

  TEST_CASE("unlearning accuracy is invariant to sample order") {
    const auto clf = centre_classifier(8);
    const auto a = stack(at_centre(0, 3), at_centre(2, 5));
    const auto b = stack(at_centre(2, 5), at_centre(0, 3));
    CHECK(unlearning_accuracy(a, clf, 0) == unlearning_accuracy(b, clf, 0));
  }

  TEST_CASE("retain accuracy is an unweighted class mean") {
    const auto clf = centre_classifier(8);
    std::map<int, Tensor> perfect{{1, at_centre(1, 5)}, {2, at_centre(2, 50)}};
    CHECK(retain_accuracy(perfect, clf) == 1.0);
    std::map<int, Tensor> half{{1, at_centre(1, 5)}, {2, at_centre(6, 50)}};
    std::map<int, double> per;
    CHECK(retain_accuracy(half, clf, &per) == doctest::Approx(0.5));
    CHECK(per.at(1) == 1.0);
    CHECK(per.at(2) == 0.0);
    CHECK_THROWS(retain_accuracy({}, clf));
  }

  TEST_CASE("retain accuracy of a chance-level assignment") {
    // Points drawn uniformly on the circle get a uniformly random mode, so
    // accuracy per prompt class is 1/8 up to binomial noise.
    const auto clf = centre_classifier(8);
    Rng rng(3);
    std::map<int, Tensor> samples;
    for (int c = 1; c < 8; ++c) {
      Tensor t = Tensor::matrix(800, 2);
      for (std::size_t i = 0; i < 800; ++i) {
        const double a = rng.uniform(0.0, 2 * M_PI);
        t(i, 0) = 4 * std::cos(a);
        t(i, 1) = 4 * std::sin(a);
      }
      samples[c] = t;
    }
    const double ira = retain_accuracy(samples, clf);
    const double sigma = std::sqrt(0.125 * 0.875 / (7 * 800.0));
    CHECK(std::abs(ira - 0.125) < 3 * sigma);
  }

  TEST_CASE("feature stats by hand") {
    const auto s = feature_stats(Tensor({2, 2}, std::vector<double>{0, 0, 2, 0}));
    CHECK(s.mean(0) == 1.0);
    CHECK(s.mean(1) == 0.0);
    CHECK(s.cov(0, 0) == doctest::Approx(2.0));
    CHECK(s.cov(0, 1) == 0.0);
    CHECK(s.cov(1, 1) == 0.0);
    CHECK_THROWS(feature_stats(Tensor({1, 2}, std::vector<double>{0, 0})));
  }

  TEST_CASE("feature stats of standard normal draws") {
    Rng rng(4);
    Tensor t = Tensor::matrix(10000, 2);
    for (auto& v : t.values()) v = rng.normal();
    const auto s = feature_stats(t);
    CHECK(s.mean.norm() < 0.05);
    CHECK((s.cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.1);
    const auto dup = feature_stats(t);
    CHECK(dup.mean == s.mean);
    CHECK(dup.cov == s.cov);
  }

  TEST_CASE("matrix square root") {
    CHECK(matrix_sqrt_psd(Eigen::MatrixXd::Identity(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-14));
    Eigen::MatrixXd d = Eigen::Vector2d(4, 9).asDiagonal();
    CHECK(matrix_sqrt_psd(d).isApprox(Eigen::MatrixXd(Eigen::Vector2d(2, 3).asDiagonal()), 1e-14));
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
      const auto m = random_spd(rng, 2);
      const auto s = matrix_sqrt_psd(m);
      CHECK((s * s - m).norm() / m.norm() < 1e-10);
      CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff() >= -1e-10);
    }
    Eigen::MatrixXd asym(2, 2);
    asym << 1, 0.5, 0, 1;
    CHECK_THROWS_AS(matrix_sqrt_psd(asym), UsageError);
    Eigen::MatrixXd neg = Eigen::Vector2d(-1e-12, 4).asDiagonal();
    CHECK(matrix_sqrt_psd(neg)(0, 0) == 0.0);
  }

  TEST_CASE("frechet distance closed forms") {
    Rng rng(6);
    const auto a = stats_of(Eigen::Vector2d(1, -2), random_spd(rng, 2));
    CHECK(frechet_distance(a, a) < 1e-6);
    CHECK(frechet_distance(a, a) >= 0.0);

    const auto n0 = stats_of(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
    const auto n1 = stats_of(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1));
    CHECK(std::abs(frechet_distance(n0, n1) - 1.0) < 1e-5);

    // 1-D: (dmu)^2 + (sigma_r - sigma_g)^2.
    const auto w = stats_of(Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Constant(1, 1, 4.0));
    CHECK(std::abs(frechet_distance(n0, w) - (9.0 + 1.0)) < 1e-5);
  }

  TEST_CASE("frechet distance matches the 2x2 closed form on random SPD covariances") {
    Rng rng(7);
    for (int k = 0; k < 25; ++k) {
      const Eigen::MatrixXd cr = random_spd(rng, 2), cg = random_spd(rng, 2);
      const Eigen::Vector2d mr(rng.normal(), rng.normal()), mg(rng.normal(), rng.normal());
      const double mu_r[2] = {mr(0), mr(1)}, mu_g[2] = {mg(0), mg(1)};
      const double cov_r[4] = {cr(0, 0), cr(0, 1), cr(1, 0), cr(1, 1)};
      const double cov_g[4] = {cg(0, 0), cg(0, 1), cg(1, 0), cg(1, 1)};
      const double oracle = testing::frechet_2d(mu_r, cov_r, mu_g, cov_g, 1e-6);
      const auto r = stats_of(mr, cr), g = stats_of(mg, cg);
      CHECK(std::abs(frechet_distance(r, g) - oracle) < 1e-8);
      CHECK(std::abs(frechet_distance(r, g) - frechet_distance(g, r)) < 1e-10);
    }
  }

  TEST_CASE("frechet distance rejects mismatched dimensions") {
    const auto a = stats_of(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
    const auto b = stats_of(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    CHECK_THROWS(frechet_distance(a, b));
  }
}
