// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "common/errors.hpp"
#include "critic/critic.hpp"
#include "diffusion/denoiser.hpp"
#include "diffusion/schedule.hpp"

using namespace cgru;
using namespace cgru::critic;
using diffusion::Context;
using numerics::Tensor;

namespace {

CriticSpec small_spec() {
  CriticSpec s;
  s.hidden = 16;
  s.embed_dim = 8;
  s.T = 10;
  return s;
}

// Synthetic buffer: n_traj trajectories with T states each, positions drawn
// at random and rewards from reward(cls, traj).
template <typename F>
std::vector<CriticSample> synthetic_buffer(std::size_t n_traj, int T, std::uint64_t seed, F reward) {
  Rng rng(seed);
  std::vector<CriticSample> buf;
  for (std::size_t k = 0; k < n_traj; ++k) {
    const int cls = static_cast<int>(k % 8);
    const double r = reward(cls, k, rng);
    for (int t = 1; t <= T; ++t) buf.push_back({{rng.normal(), rng.normal()}, Context(cls, 8), t, r, k});
  }
  return buf;
}

bool same_samples(const std::vector<CriticSample>& a, const std::vector<CriticSample>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].x_t != b[i].x_t || !(a[i].ctx == b[i].ctx) || a[i].t != b[i].t || a[i].r_final != b[i].r_final ||
        a[i].trajectory != b[i].trajectory)
      return false;
  return true;
}

}  // namespace

TEST_SUITE("critic") {
  TEST_CASE("film modulation arithmetic") {
    const auto x = Tensor::row({1.0, 2.0});
    CHECK(film_modulate(x, Tensor::row({2.0, 3.0}), Tensor::row({-1.0, 0.0})) == Tensor::row({1.0, 6.0}));
    CHECK(film_modulate(x, Tensor::row({1.0, 1.0}), Tensor::row({0.0, 0.0})) == x);
    CHECK(film_modulate(x, Tensor::row({0.0, 0.0}), Tensor::row({4.0, 5.0})) == Tensor::row({4.0, 5.0}));
    CHECK_THROWS_AS(film_modulate(x, Tensor::row({1.0}), Tensor::row({0.0, 0.0})), ShapeError);
  }

  TEST_CASE("zero critic outputs zero everywhere") {
    const auto spec = small_spec();
    Critic c(numerics::Network(critic_arch(spec)), spec);
    for (int t : {0, 1, 10})
      CHECK(critic_forward(c, std::vector<double>{0.3, -2.0}, Context(3, 8), t) == 0.0);
  }

  TEST_CASE("timestep reaches the output through film, and only when aware") {
    auto spec = small_spec();
    Rng rng(1);
    const auto c = Critic::initialized(spec, rng);
    const std::vector<double> x{0.5, 1.5};
    const double a = critic_forward(c, x, Context(2, 8), 1);
    CHECK(a == critic_forward(c, x, Context(2, 8), 1));
    CHECK(a != critic_forward(c, x, Context(2, 8), spec.T));
    CHECK_THROWS_AS(critic_forward(c, x, Context(2, 8), spec.T + 1), UsageError);

    spec.timestep_aware = false;
    const Critic plain(c.network(), spec);
    CHECK(critic_forward(plain, x, Context(2, 8), 1) == critic_forward(plain, x, Context(2, 8), spec.T));
  }

  TEST_CASE("buffer holds one sample per transition state sharing the trajectory reward") {
    diffusion::DenoiserSpec ds;
    ds.hidden = 8;
    ds.embed_dim = 8;
    ds.T = 50;
    Rng init(2);
    const auto net = diffusion::make_denoiser(ds, init);
    const auto sched = diffusion::make_schedule(50, 0.002, 0.4);
    diffusion::DiffusionPolicy policy(net, ds, sched);
    rewards::RewardSpec rs;
    rs.kind = rewards::RewardKind::mode_distance;
    const std::vector<Context> prompts{Context(0, 8), Context(5, 8)};

    Rng r1(3), r2(3);
    const auto buf = build_critic_buffer(policy, prompts, rs, nullptr, 3, 11, r1);
    CHECK(buf.size() == 150);
    CHECK(same_samples(buf, build_critic_buffer(policy, prompts, rs, nullptr, 3, 11, r2)));

    std::map<std::uint64_t, std::set<double>> rewards_of;
    std::set<int> ts;
    for (const auto& s : buf) {
      rewards_of[s.trajectory].insert(s.r_final);
      ts.insert(s.t);
    }
    CHECK(rewards_of.size() == 3);
    for (const auto& [k, rs_] : rewards_of) CHECK(rs_.size() == 1);
    CHECK(*ts.begin() == 1);
    CHECK(*ts.rbegin() == 50);

    // Generation order is trajectory-major with t descending; the buffer is not.
    bool generation_order = true;
    for (std::size_t i = 1; i < buf.size() && generation_order; ++i)
      generation_order = std::tie(buf[i - 1].trajectory, buf[i].t) <= std::tie(buf[i].trajectory, buf[i - 1].t);
    CHECK_FALSE(generation_order);
  }

  TEST_CASE("single sample regression drives the loss below 1e-4 within 500 steps") {
    const auto spec = small_spec();
    Rng rng(4);
    auto c = Critic::initialized(spec, rng);
    std::vector<CriticSample> one{{{0.2, -0.4}, Context(1, 8), 3, 2.0, 0}};
    CriticTraining cfg{500, 1, 1e-3};
    Rng trng(5);
    const auto hist = critic_train(c, one, cfg, trng);
    CHECK(hist.size() == 500);
    CHECK(critic_mse(c, one) < 1e-4);
  }

  TEST_CASE("constant reward buffer converges to the constant") {
    const auto spec = small_spec();
    const auto buf = synthetic_buffer(64, spec.T, 6, [](int, std::size_t, Rng&) { return 5.0; });
    Rng rng(7);
    auto c = Critic::initialized(spec, rng);
    const double initial = critic_mse(c, buf);
    Rng trng(8);
    const auto hist = critic_train(c, buf, CriticTraining{40, 64, 1e-2}, trng);
    CHECK(critic_mse(c, buf) < initial / 100);
    Rng probe(9);
    for (int k = 0; k < 20; ++k) {
      const std::vector<double> x{probe.normal(), probe.normal()};
      CHECK(std::abs(critic_forward(c, x, Context(k % 8, 8), 1 + k % spec.T) - 5.0) < 0.1);
    }
    for (std::size_t e = 1; e < hist.size(); ++e) CHECK(hist[e] <= hist[e - 1] * 1.1);
  }

  TEST_CASE("training result does not depend on buffer order") {
    const auto spec = small_spec();
    auto buf = synthetic_buffer(24, spec.T, 10, [](int cls, std::size_t, Rng& r) { return cls + r.normal(); });
    Rng i1(11), i2(11);
    auto a = Critic::initialized(spec, i1);
    auto b = Critic::initialized(spec, i2);
    Rng t1(12), t2(12);
    critic_train(a, buf, CriticTraining{3, 32, 1e-3}, t1);
    std::reverse(buf.begin(), buf.end());
    critic_train(b, buf, CriticTraining{3, 32, 1e-3}, t2);
    CHECK(a.network() == b.network());
  }

  TEST_CASE("empty buffer is rejected") {
    const auto spec = small_spec();
    Rng rng(1);
    auto c = Critic::initialized(spec, rng);
    CHECK_THROWS_AS(critic_train(c, {}, CriticTraining{}, rng), UsageError);
  }

  TEST_CASE("ablation needs more than one timestep") {
    const auto spec = small_spec();
    auto buf = synthetic_buffer(20, 1, 13, [](int cls, std::size_t, Rng&) { return cls * 1.0; });
    CHECK_THROWS_AS(ablation_compare(buf, spec, CriticTraining{1, 16, 1e-3}, 1), UsageError);
  }

  TEST_CASE("identically seeded timestep-aware critics reach identical error") {
    const auto spec = small_spec();
    const auto buf = synthetic_buffer(20, spec.T, 14, [](int cls, std::size_t, Rng& r) { return cls + r.normal(); });
    double mse[2];
    for (double& m : mse) {
      Rng init(15), train(16);
      auto c = Critic::initialized(spec, init);
      critic_train(c, buf, CriticTraining{2, 32, 1e-3}, train);
      m = critic_mse(c, buf);
    }
    CHECK(mse[0] == mse[1]);
  }

  TEST_CASE("t-independent rewards give no systematic ablation gap") {
    const auto spec = small_spec();
    const auto buf =
        synthetic_buffer(80, spec.T, 17, [](int cls, std::size_t, Rng& r) { return (cls == 0 ? 0.0 : 8.0) + r.normal(); });
    std::vector<double> gap;
    for (std::uint64_t s = 1; s <= 5; ++s) {
      const auto res = ablation_compare(buf, spec, CriticTraining{8, 64, 3e-3}, s);
      gap.push_back(res.timestep_aware_mse - res.plain_mse);
    }
    double mean = 0, var = 0;
    for (double g : gap) mean += g / 5;
    for (double g : gap) var += (g - mean) * (g - mean) / 4;
    CHECK(std::abs(mean) <= 2 * std::sqrt(var));
  }
}
