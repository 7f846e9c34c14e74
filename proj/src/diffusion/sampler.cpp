// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "diffusion/sampler.hpp"

#include <cmath>

#include "common/parallel.hpp"
#include "diffusion/schedule.hpp"

namespace cgru::diffusion {

namespace {

// Runs the reverse chain for a block of rows, each with its own stream.
// When `record` is set, latents and log-probs are written into trajs.
void run_chain(const GaussianPolicy& policy, Tensor& x, int t_start, std::span<const int> classes,
               std::vector<Rng>& rngs, Trajectory* record) {
  const std::size_t rows = classes.size(), d = policy.dim();
  StateBatch states{Tensor(), std::vector<int>(rows), std::vector<int>(classes.begin(), classes.end())};
  for (int t = t_start; t >= 1; --t) {
    states.x_t = x;
    std::fill(states.t.begin(), states.t.end(), t);
    auto ev = policy.evaluate(states);
    const double sigma = policy.sigma(t);
    Tensor next = Tensor::matrix(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < d; ++j) next(r, j) = ev->mean()(r, j) + sigma * rngs[r].normal();
      if (record) {
        Trajectory& tr = record[r];
        tr.logp_old[static_cast<std::size_t>(t - 1)] = gaussian_logprob(next.row_span(r), ev->mean().row_span(r), sigma);
        auto dst = tr.x(t - 1);
        std::copy(next.row_span(r).begin(), next.row_span(r).end(), dst.begin());
      }
    }
    x = std::move(next);
  }
}

}  // namespace

Trajectory sample_trajectory(const GaussianPolicy& policy, const Context& ctx, Rng& rng) {
  const int T = policy.num_steps();
  const std::size_t d = policy.dim();
  Trajectory tr;
  tr.ctx = ctx;
  tr.T = T;
  tr.dim = d;
  tr.latents.assign(static_cast<std::size_t>(T + 1) * d, 0.0);
  tr.logp_old.assign(static_cast<std::size_t>(T), 0.0);
  Tensor x = Tensor::matrix(1, d);
  for (std::size_t j = 0; j < d; ++j) tr.x(T)[j] = x(0, j) = rng.normal();
  std::vector<Rng> rngs{rng};
  const int cls[1] = {ctx.class_id};
  run_chain(policy, x, T, cls, rngs, &tr);
  rng = rngs.front();
  return tr;
}

std::vector<Trajectory> sample_trajectories(const GaussianPolicy& policy, std::span<const Context> contexts,
                                            std::uint64_t seed, std::uint64_t first_index, StreamTag tag) {
  const int T = policy.num_steps();
  const std::size_t d = policy.dim(), n = contexts.size();
  std::vector<Trajectory> out(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    const std::size_t rows = end - begin;
    std::vector<Rng> rngs;
    std::vector<int> classes(rows);
    Tensor x = Tensor::matrix(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = begin + r;
      rngs.emplace_back(seed, tag, first_index + i);
      Trajectory& tr = out[i];
      tr.ctx = contexts[i];
      tr.T = T;
      tr.dim = d;
      tr.seed = first_index + i;
      tr.latents.assign(static_cast<std::size_t>(T + 1) * d, 0.0);
      tr.logp_old.assign(static_cast<std::size_t>(T), 0.0);
      for (std::size_t j = 0; j < d; ++j) tr.x(T)[j] = x(r, j) = rngs[r].normal();
      classes[r] = contexts[i].class_id;
    }
    run_chain(policy, x, T, classes, rngs, out.data() + begin);
  });
  return out;
}

Tensor rollout_from(const GaussianPolicy& policy, const Tensor& x_t, int t, std::span<const int> classes,
                    std::uint64_t seed, std::uint64_t first_index, StreamTag tag) {
  const std::size_t n = classes.size(), d = policy.dim();
  if (x_t.rows() != n || x_t.cols() != d) throw ShapeError("rollout_from: x_t rows do not match classes");
  Tensor out = Tensor::matrix(n, d);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    const std::size_t rows = end - begin;
    std::vector<Rng> rngs;
    Tensor x = Tensor::matrix(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
      rngs.emplace_back(seed, tag, first_index + begin + r);
      for (std::size_t j = 0; j < d; ++j) x(r, j) = x_t(begin + r, j);
    }
    run_chain(policy, x, t, classes.subspan(begin, rows), rngs, nullptr);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < d; ++j) out(begin + r, j) = x(r, j);
  });
  return out;
}

Tensor generate(const GaussianPolicy& policy, std::span<const int> classes, std::uint64_t seed,
                std::uint64_t first_index, StreamTag tag) {
  const std::size_t n = classes.size(), d = policy.dim();
  Tensor x0 = Tensor::matrix(n, d);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    const std::size_t rows = end - begin;
    std::vector<Rng> rngs;
    Tensor x = Tensor::matrix(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
      rngs.emplace_back(seed, tag, first_index + begin + r);
      for (std::size_t j = 0; j < d; ++j) x(r, j) = rngs[r].normal();
    }
    run_chain(policy, x, policy.num_steps(), classes.subspan(begin, rows), rngs, nullptr);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < d; ++j) x0(begin + r, j) = x(r, j);
  });
  return x0;
}

}  // namespace cgru::diffusion
