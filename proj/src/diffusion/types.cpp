// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "diffusion/types.hpp"

#include <string>

namespace cgru::diffusion {

Context::Context(int cls, int k) : class_id(cls), num_classes(k) {
  if (k < 1 || cls < 0 || cls >= k)
    throw UsageError("class id " + std::to_string(cls) + " outside [0, " + std::to_string(k) + ")");
}

std::vector<double> Context::encoding() const {
  std::vector<double> e(static_cast<std::size_t>(num_classes), 0.0);
  e[static_cast<std::size_t>(class_id)] = 1.0;
  return e;
}

void DiffusionMDPConfig::validate() const {
  if (discount != 1.0) throw UsageError("terminal-reward MDP requires discount 1");
  if (dim == 0 || num_classes < 1) throw UsageError("MDP needs a positive dimension and class count");
}

}  // namespace cgru::diffusion
