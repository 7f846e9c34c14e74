// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "numerics/network.hpp"

namespace cgru::numerics {

struct AdamState {
  std::uint64_t step = 0;
  ParamGrads m;
  ParamGrads v;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_network(const Network& net, double lr);
};

/// One bias-corrected Adam update of net's parameters in place.
void adam_step(AdamState& state, Network& net, const ParamGrads& grads);

}  // namespace cgru::numerics
