// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/tensor.hpp"

#include <cmath>

namespace cgru::numerics {

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

}  // namespace cgru::numerics
