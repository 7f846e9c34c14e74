// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "common/errors.hpp"
#include "diffusion/dataset.hpp"
#include "diffusion/denoiser.hpp"
#include "diffusion/sampler.hpp"
#include "diffusion/schedule.hpp"
#include "diffusion/train.hpp"
#include "numerics/network.hpp"
#include "support/oracles.hpp"

using namespace cgru;
using namespace cgru::diffusion;

namespace {

struct SmallModel {
  DenoiserSpec spec;
  NoiseSchedule sched;
  numerics::Network net;
  SmallModel() : sched(make_schedule(6, 0.01, 0.3)) {
    spec.hidden = 16;
    spec.embed_dim = 8;
    spec.T = 6;
    Rng rng(5);
    net = make_denoiser(spec, rng);
  }
};

}  // namespace

TEST_SUITE("diffusion") {
  TEST_CASE("linear schedule endpoints and cumulative product") {
    const auto s = make_schedule(50, 0.002, 0.4);
    CHECK(s.beta(1) == doctest::Approx(0.002).epsilon(1e-15));
    CHECK(s.beta(50) == doctest::Approx(0.4).epsilon(1e-15));
    double prod = 1.0;
    for (int t = 1; t <= 50; ++t) {
      const double beta = 0.002 + (0.4 - 0.002) * (t - 1) / 49.0;
      prod *= 1.0 - beta;
      CHECK(s.beta(t) == doctest::Approx(beta).epsilon(1e-13));
      CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-12));
      CHECK(s.sigma(t) == doctest::Approx(std::sqrt(beta)).epsilon(1e-13));
    }
    CHECK(s.alpha_bar(50) < 1e-4);
    CHECK_THROWS_AS(s.beta(0), UsageError);
    CHECK_THROWS_AS(s.beta(51), UsageError);
  }

  TEST_CASE("standard DDPM range matches a cumulative product oracle") {
    const auto s = make_schedule(50, 1e-4, 0.02);
    double prod = 1.0;
    for (int t = 1; t <= 50; ++t) {
      prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 49.0);
      if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
      CHECK(s.alpha_bar(t) <= s.alpha(t));
    }
    CHECK(std::abs(s.alpha_bar(50) - prod) < 1e-12);
  }

  TEST_CASE("reverse mean by hand") {
    // beta_1 chosen so that abar_2 = 0.5 with alpha_2 = 0.81.
    const std::vector<double> betas{1.0 - 0.5 / 0.81, 0.19};
    const auto s = schedule_from_betas(betas);
    CHECK(s.alpha_bar(2) == doctest::Approx(0.5).epsilon(1e-14));
    const auto mu = reverse_mean_from_eps(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 0.0}, 2, s);
    CHECK(mu[0] == doctest::Approx((1 - 0.19 / std::sqrt(0.5)) / 0.9).epsilon(1e-12));
    CHECK(mu[0] == doctest::Approx(0.81256).epsilon(1e-5));
    CHECK(mu[1] == 0.0);
  }

  TEST_CASE("schedule rejects degenerate betas") {
    CHECK_THROWS(make_schedule(0, 0.1, 0.2));
    CHECK_THROWS(make_schedule(10, 0.1, 1.0));
    CHECK_THROWS(make_schedule(10, -0.1, 0.2));
  }

  TEST_CASE("q_sample and reverse mean invert each other at the true noise") {
    const auto s = make_schedule(10, 0.01, 0.3);
    const std::vector<double> x0{1.5, -0.5}, eps{0.3, -1.2};
    for (int t = 1; t <= 10; ++t) {
      const auto xt = q_sample(x0, t, eps, s);
      CHECK(xt[0] == doctest::Approx(std::sqrt(s.alpha_bar(t)) * 1.5 + std::sqrt(1 - s.alpha_bar(t)) * 0.3));
      // Posterior mean of x_{t-1} given x_t and x_0, the standard DDPM closed form.
      const auto mu = reverse_mean_from_eps(xt, eps, t, s);
      const double abar_prev = t == 1 ? 1.0 : s.alpha_bar(t - 1);
      for (int i = 0; i < 2; ++i) {
        const double c0 = std::sqrt(abar_prev) * s.beta(t) / (1 - s.alpha_bar(t));
        const double ct = std::sqrt(s.alpha(t)) * (1 - abar_prev) / (1 - s.alpha_bar(t));
        CHECK(mu[i] == doctest::Approx(c0 * x0[i] + ct * xt[i]).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("gaussian log density matches the closed form") {
    const std::vector<double> x{1.0, 2.0}, mu{0.5, 2.5};
    const double sigma = 0.7;
    const double expect = -std::log(2 * std::numbers::pi * sigma * sigma) - 0.5 / (2 * sigma * sigma);
    CHECK(gaussian_logprob(x, mu, sigma) == doctest::Approx(expect).epsilon(1e-14));
  }

  TEST_CASE("mixture modes sit on the circle and samples concentrate there") {
    MixtureSpec m;
    const auto c2 = m.center(2);
    CHECK(c2[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c2[1] == doctest::Approx(4.0));
    Rng rng(6);
    const auto pts = sample_mode(m, 3, 4000, rng);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < 4000; ++i) {
      mx += pts(i, 0) / 4000;
      my += pts(i, 1) / 4000;
    }
    const auto c = m.center(3);
    // 5 standard errors of a 0.3-stddev mean over 4000 draws.
    CHECK(std::abs(mx - c[0]) < 5 * 0.3 / std::sqrt(4000.0));
    CHECK(std::abs(my - c[1]) < 5 * 0.3 / std::sqrt(4000.0));
  }

  TEST_CASE("batched sampling equals per-stream sampling and logs its own log-probs") {
    SmallModel m;
    DiffusionPolicy policy(m.net, m.spec, m.sched);
    std::vector<Context> ctx{Context(1, 8), Context(4, 8), Context(0, 8)};
    const auto batch = sample_trajectories(policy, ctx, 9, 100);
    REQUIRE(batch.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      Rng rng(9, StreamTag::trajectory, 100 + i);
      const auto one = sample_trajectory(policy, ctx[i], rng);
      CHECK(one.latents == batch[i].latents);
      CHECK(one.logp_old == batch[i].logp_old);
    }
    // Stored log-probs agree with an independent evaluation of each step.
    const auto& tr = batch[1];
    for (int t = 1; t <= m.sched.T; ++t) {
      StateBatch st;
      st.x_t = numerics::Tensor({1, 2}, std::vector<double>(tr.x(t).begin(), tr.x(t).end()));
      st.t = {t};
      st.cls = {4};
      const auto eps = predict_eps(m.net, m.spec, st);
      const auto mu = reverse_mean_from_eps(tr.x(t), eps.row_span(0), t, m.sched);
      CHECK(tr.logp(t) == doctest::Approx(gaussian_logprob(tr.x(t - 1), mu, m.sched.sigma(t))).epsilon(1e-12));
    }
  }

  TEST_CASE("score vjp agrees with finite differences of the log-likelihood") {
    SmallModel m;
    DiffusionPolicy policy(m.net, m.spec, m.sched);
    std::vector<Context> ctx{Context(2, 8), Context(5, 8)};
    const auto trajs = sample_trajectories(policy, ctx, 3, 0);
    StateBatch st;
    st.x_t = numerics::Tensor::matrix(4, 2);
    numerics::Tensor x_prev = numerics::Tensor::matrix(4, 2);
    const int ts[4] = {1, 3, 6, 2};
    for (int r = 0; r < 4; ++r) {
      const auto& tr = trajs[static_cast<std::size_t>(r % 2)];
      for (int d = 0; d < 2; ++d) {
        st.x_t(r, d) = tr.x(ts[r])[d];
        x_prev(r, d) = tr.x(ts[r] - 1)[d];
      }
      st.t.push_back(ts[r]);
      st.cls.push_back(tr.ctx.class_id);
    }
    const std::vector<double> coeff{0.7, -1.3, 2.0, 0.4};
    const auto analytic = policy.evaluate(st)->score_vjp(x_prev, coeff);

    auto objective = [&](const numerics::Network& net) {
      DiffusionPolicy p(net, m.spec, m.sched);
      const auto lp = p.log_prob(st, x_prev);
      double s = 0;
      for (int r = 0; r < 4; ++r) s += coeff[r] * lp[r];
      return s;
    };
    Rng rng(8);
    auto params = m.net.flat_params();
    numerics::Network probe = m.net;
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = rng.below(params.size());
      const double keep = params[i];
      params[i] = keep + 1e-6;
      probe.set_flat_params(params);
      const double up = objective(probe);
      params[i] = keep - 1e-6;
      probe.set_flat_params(params);
      const double down = objective(probe);
      params[i] = keep;
      worst = std::max(worst, testing::rel_err(analytic[i], (up - down) / 2e-6));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("generation is deterministic for a fixed seed") {
    SmallModel m;
    DiffusionPolicy policy(m.net, m.spec, m.sched);
    const std::vector<int> cls{3, 3, 6};
    const auto a = generate(policy, cls, 42, 0);
    const auto b = generate(policy, cls, 42, 0);
    CHECK(a == b);
    CHECK(a.rows() == 3);
    CHECK(a.all_finite());
  }

  TEST_CASE("ddpm loss is the mean squared norm per row") {
    const numerics::Tensor a({2, 2}, std::vector<double>{1, 0, 0, 0});
    const numerics::Tensor b({2, 2}, std::vector<double>{0, 0, 0, 2});
    CHECK(ddpm_loss(a, b) == doctest::Approx(2.5));
  }

  TEST_CASE("denoiser shape check rejects a network for another configuration") {
    SmallModel m;
    DenoiserSpec other = m.spec;
    other.num_classes = 5;
    CHECK_THROWS_AS(check_denoiser(m.net, other), ShapeError);
    CHECK_NOTHROW(check_denoiser(m.net, m.spec));
  }
}
