#pragma once

/// @file known_form.hpp
/// @brief Least-squares identification of the smoothed Stribeck coefficients.

#include <array>

#include "kanfric/friction.hpp"
#include "kanfric/optimizers.hpp"

namespace kanfric {

/// Unconstrained coordinates (k1, k2, log k3, k4).
Eigen::Vector4d to_unconstrained(const StribeckParamsd& p);
StribeckParamsd from_unconstrained(const Eigen::Vector4d& theta, double smoothing = 50.0);

/// Mean squared residual of the Stribeck law over `data` and its gradient
/// in unconstrained coordinates. |v| is differentiated with subgradient 0
/// at v = 0.
double stribeck_loss(const FrictionDataset& data, const Eigen::Vector4d& theta, Eigen::VectorXd& grad,
                     double smoothing = 50.0);

struct KnownFormFit {
  StribeckParamsd params;
  FitTrace trace;
};

/// Minimizes the MSE over (k1, k2, k3, k4) starting from `init`; k3 stays
/// positive through its log parameterization.
KnownFormFit fit_known_form(const FrictionDataset& data, const StribeckParamsd& init, const FitConfig& config);

/// Starting point (10, 5, 0.5, 0).
inline StribeckParamsd default_known_form_init() { return {10.0, 5.0, 0.5, 0.0, 50.0}; }

}  // namespace kanfric
