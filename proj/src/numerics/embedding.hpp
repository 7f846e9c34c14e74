// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace cgru::numerics {

/// Sinusoidal timestep embedding laid out as [sin(t*w_0..w_{h-1}), cos(t*w_0..w_{h-1})]
/// with w_i = 10000^(-i/h), h = dim/2.
std::vector<double> sinusoidal_embed(int t, int dim, int t_max);

}  // namespace cgru::numerics
