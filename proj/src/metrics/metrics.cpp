// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "common/errors.hpp"
#include "rewards/rewards.hpp"

namespace cgru::metrics {

double unlearning_accuracy(const Tensor& samples, const Network& clf, int target) {
  if (samples.rows() == 0) throw UsageError("unlearning_accuracy: empty sample set");
  const auto pred = rewards::predict_classes(clf, samples);
  const auto hits = std::count(pred.begin(), pred.end(), target);
  return 1.0 - static_cast<double>(hits) / static_cast<double>(pred.size());
}

double retain_accuracy(const std::map<int, Tensor>& samples_by_class, const Network& clf,
                       std::map<int, double>* per_class) {
  if (samples_by_class.empty()) throw UsageError("retain_accuracy: no retain classes");
  double total = 0.0;
  for (const auto& [cls, pts] : samples_by_class) {
    if (pts.rows() == 0) throw UsageError("retain_accuracy: class " + std::to_string(cls) + " has no samples");
    const auto pred = rewards::predict_classes(clf, pts);
    const double acc = static_cast<double>(std::count(pred.begin(), pred.end(), cls)) / static_cast<double>(pred.size());
    if (per_class) (*per_class)[cls] = acc;
    total += acc;
  }
  return total / static_cast<double>(samples_by_class.size());
}

FeatureStats feature_stats(const Tensor& samples) {
  const std::size_t n = samples.rows(), d = samples.cols();
  if (n < 2) throw UsageError("feature_stats: need at least two samples");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      samples.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  FeatureStats s;
  s.n = n;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  return s;
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ShapeError("matrix_sqrt_psd: matrix is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw UsageError("matrix_sqrt_psd: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success) throw NumericError("matrix_sqrt_psd: eigendecomposition failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd s = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

double frechet_distance(const FeatureStats& r, const FeatureStats& g) {
  if (r.mean.size() != g.mean.size() || r.cov.rows() != g.cov.rows())
    throw ShapeError("frechet_distance: feature dimensions differ");
  const auto d = r.mean.size();
  const Eigen::MatrixXd eps = 1e-6 * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd sr = r.cov + eps, sg = g.cov + eps;
  const Eigen::MatrixXd a = matrix_sqrt_psd(sr);
  const Eigen::MatrixXd middle = a * sg * a;
  const double tr_cross = matrix_sqrt_psd(0.5 * (middle + middle.transpose())).trace();
  const double value = (r.mean - g.mean).squaredNorm() + sr.trace() + sg.trace() - 2.0 * tr_cross;
  return std::max(0.0, value);
}

std::string summary(const EvalReport& report, const std::string& label) {
  std::string out = fmt::format("[{}]\n  UA  {:.4f}\n  IRA {:.4f}\n  FD  {:.6f}\n", label, report.ua, report.ira, report.fd);
  for (const auto& [cls, acc] : report.per_class_acc) out += fmt::format("  class {} acc {:.4f}\n", cls, acc);
  return out;
}

}  // namespace cgru::metrics
