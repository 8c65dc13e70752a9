#pragma once

/// @file metrics.hpp
/// @brief Coefficient of determination, relative parameter error and
/// Pearson correlation.

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "kanfric/types.hpp"

namespace kanfric {

/// 1 - SS_res / SS_tot. Returns 1 when SS_res == 0 and 0 when SS_tot == 0.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar r_squared(const Eigen::MatrixBase<DerivedA>& truth, const Eigen::MatrixBase<DerivedB>& pred) {
  using Scalar = typename DerivedA::Scalar;
  if (truth.size() != pred.size() || truth.size() == 0)
    throw std::invalid_argument("r_squared: lengths must match and be nonzero");
  const Scalar ss_res = (truth - pred).squaredNorm();
  if (ss_res == Scalar(0)) return Scalar(1);
  if (truth.maxCoeff() == truth.minCoeff()) return Scalar(0);  // SStot = 0
  const Scalar mean = truth.mean();
  const Scalar ss_tot = (truth.array() - mean).square().sum();
  return Scalar(1) - ss_res / ss_tot;
}

/// |pred - truth| / |truth|
template <typename Scalar>
Scalar relative_error(Scalar pred, Scalar truth) {
  if (truth == Scalar(0)) throw std::invalid_argument("relative_error: truth must be nonzero");
  return std::abs((pred - truth) / truth);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson_correlation(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson_correlation: need equal lengths >= 2");
  const auto da = (a.array() - a.mean()).eval();
  const auto db = (b.array() - b.mean()).eval();
  const Scalar sa = da.square().sum(), sb = db.square().sum();
  if (sa == Scalar(0) || sb == Scalar(0)) throw std::invalid_argument("pearson_correlation: constant input");
  const Scalar r = (da * db).sum() / std::sqrt(sa * sb);
  return std::max(Scalar(-1), std::min(Scalar(1), r));
}

/// Scores of one pipeline run; serialized by report.hpp.
struct FitReport {
  double r_squared = 0.0;
  std::optional<double> r_squared_vs_clean;
  std::map<std::string, double> relative_errors;
  std::map<std::string, double> estimates;
  std::map<std::string, double> correlations;
  std::map<std::string, std::string> config;
  double wall_seconds = 0.0;
};

}  // namespace kanfric
