// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>

namespace cgru {

/// Purpose tags used to key independent random streams off one master seed.
enum class StreamTag : std::uint64_t {
  init = 1,
  dataset = 2,
  trajectory = 3,
  training = 4,
  shuffle = 5,
  contexts = 6,
  evaluation = 7,
  diagnostics = 8,
  rollout = 9,
  critic = 10,
};

/// Keyed random stream. Two streams built from the same (seed, tag, index)
/// produce the same sequence no matter which thread or in which order they
/// are created, so per-trajectory streams make sampling worker-count invariant.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);
  Rng(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    std::shuffle(items.begin(), items.end(), engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t stream_id(StreamTag tag, std::uint64_t index);

}  // namespace cgru
