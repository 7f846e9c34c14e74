// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "common/rng.hpp"
#include "numerics/tensor.hpp"

namespace cgru::diffusion {

using numerics::Tensor;

/// K isotropic Gaussian modes equally spaced on a circle; mode k sits at
/// angle 2*pi*k/K.
struct MixtureSpec {
  int num_classes = 8;
  double radius = 4.0;
  double stddev = 0.3;

  std::array<double, 2> center(int k) const;
};

struct LabeledData {
  Tensor points;  // (n, 2)
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  LabeledData subset(std::span<const std::size_t> idx) const;
};

/// n points with uniformly drawn class labels.
LabeledData sample_dataset(const MixtureSpec& spec, std::size_t n, Rng& rng);

/// n points of a single class.
Tensor sample_mode(const MixtureSpec& spec, int cls, std::size_t n, Rng& rng);

}  // namespace cgru::diffusion
