// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/adam.hpp"

#include <cmath>

namespace cgru::numerics {

AdamState AdamState::for_network(const Network& net, double lr) {
  AdamState s;
  s.m = net.zero_grads();
  s.v = net.zero_grads();
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, Network& net, const ParamGrads& grads) {
  auto& params = net.params();
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam: gradient/state count does not match parameter count");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (grads[k].shape() != params[k].value.shape() || state.m[k].shape() != params[k].value.shape())
      throw ShapeError("adam: shape mismatch for " + params[k].name);

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k].value.data();
    double* m = state.m[k].data();
    double* v = state.v[k].data();
    const double* g = grads[k].data();
    for (std::size_t i = 0, n = grads[k].size(); i < n; ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace cgru::numerics
