// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/embedding.hpp"

#include <cmath>
#include <string>

#include "common/errors.hpp"

namespace cgru::numerics {

std::vector<double> sinusoidal_embed(int t, int dim, int t_max) {
  if (dim <= 0 || dim % 2 != 0) throw UsageError("sinusoidal_embed: dim must be even and positive, got " + std::to_string(dim));
  if (t < 0 || t > t_max)
    throw UsageError("sinusoidal_embed: timestep " + std::to_string(t) + " outside [0, " + std::to_string(t_max) + "]");
  const int half = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    const double a = static_cast<double>(t) * freq;
    out[i] = std::sin(a);
    out[half + i] = std::cos(a);
  }
  return out;
}

}  // namespace cgru::numerics
