// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "diffusion/dataset.hpp"

#include <cmath>
#include <numbers>

namespace cgru::diffusion {

std::array<double, 2> MixtureSpec::center(int k) const {
  const double a = 2.0 * std::numbers::pi * k / num_classes;
  return {radius * std::cos(a), radius * std::sin(a)};
}

LabeledData LabeledData::subset(std::span<const std::size_t> idx) const {
  LabeledData out;
  out.num_classes = num_classes;
  out.points = Tensor::matrix(idx.size(), points.cols());
  out.labels.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t j = 0; j < points.cols(); ++j) out.points(r, j) = points(idx[r], j);
    out.labels.push_back(labels[idx[r]]);
  }
  return out;
}

LabeledData sample_dataset(const MixtureSpec& spec, std::size_t n, Rng& rng) {
  if (n == 0) throw UsageError("sample_dataset: n must be at least 1");
  if (spec.num_classes < 1 || !(spec.stddev > 0.0)) throw UsageError("sample_dataset: invalid mixture spec");
  LabeledData data;
  data.num_classes = spec.num_classes;
  data.points = Tensor::matrix(n, 2);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(rng.below(static_cast<std::size_t>(spec.num_classes)));
    const auto c = spec.center(k);
    data.labels[i] = k;
    data.points(i, 0) = c[0] + spec.stddev * rng.normal();
    data.points(i, 1) = c[1] + spec.stddev * rng.normal();
  }
  return data;
}

Tensor sample_mode(const MixtureSpec& spec, int cls, std::size_t n, Rng& rng) {
  Tensor pts = Tensor::matrix(n, 2);
  const auto c = spec.center(cls);
  for (std::size_t i = 0; i < n; ++i) {
    pts(i, 0) = c[0] + spec.stddev * rng.normal();
    pts(i, 1) = c[1] + spec.stddev * rng.normal();
  }
  return pts;
}

}  // namespace cgru::diffusion
