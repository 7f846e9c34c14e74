// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "numerics/network.hpp"
#include "numerics/tensor.hpp"

namespace cgru::metrics {

using numerics::Network;
using numerics::Tensor;

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n = 0;
};

struct EvalReport {
  double ua = 0.0;
  double ira = 0.0;
  double fd = 0.0;
  std::map<int, double> per_class_acc;
};

/// Fraction of samples whose argmax class is not target.
double unlearning_accuracy(const Tensor& samples, const Network& clf, int target);

/// Mean over classes of the fraction classified as that class.
double retain_accuracy(const std::map<int, Tensor>& samples_by_class, const Network& clf,
                       std::map<int, double>* per_class = nullptr);

/// Sample mean and unbiased covariance of the rows; symmetrised.
FeatureStats feature_stats(const Tensor& samples);

/// Q sqrt(max(L, 0)) Q^T. Throws UsageError if m is not symmetric.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m);

/// |mu_r - mu_g|^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}) with 1e-6 I added to
/// both covariances. The cross term uses Tr((S_r S_g)^{1/2}) = Tr((A S_g A)^{1/2})
/// with A = S_r^{1/2}, which keeps every square root symmetric.
double frechet_distance(const FeatureStats& r, const FeatureStats& g);

std::string summary(const EvalReport& report, const std::string& label);

}  // namespace cgru::metrics
