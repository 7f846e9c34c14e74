// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <span>
#include <vector>

#include "numerics/tensor.hpp"

namespace cgru::diffusion {

using numerics::Tensor;

/// A batch of policy states (x_t, t, class), one per row.
struct StateBatch {
  Tensor x_t;  // (rows, dim)
  std::vector<int> t;
  std::vector<int> cls;

  std::size_t rows() const { return t.size(); }
};

/// Result of evaluating the policy on a state batch. Keeps whatever the
/// policy needs to form score-function gradients for the same rows.
class PolicyEvaluation {
 public:
  virtual ~PolicyEvaluation() = default;
  const Tensor& mean() const { return mean_; }

  /// Flat sum_i coeff_i * grad_theta log p(x_prev_i | state_i).
  virtual std::vector<double> score_vjp(const Tensor& x_prev, std::span<const double> coeff) const = 0;

 protected:
  Tensor mean_;
};

/// Reverse kernel p(x_{t-1} | x_t, c) = N(mean(x_t, t, c), sigma_t^2 I) with
/// a fixed, parameter-free sigma.
class GaussianPolicy {
 public:
  virtual ~GaussianPolicy() = default;
  virtual std::size_t dim() const = 0;
  virtual int num_steps() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual double sigma(int t) const = 0;
  virtual std::unique_ptr<PolicyEvaluation> evaluate(const StateBatch& states) const = 0;

  /// Per-row log p(x_prev | state) under the current parameters.
  std::vector<double> log_prob(const StateBatch& states, const Tensor& x_prev) const;
};

}  // namespace cgru::diffusion
