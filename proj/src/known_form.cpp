#include "kanfric/known_form.hpp"

#include <cmath>
#include <stdexcept>

namespace kanfric {

Eigen::Vector4d to_unconstrained(const StribeckParamsd& p) {
  if (!(p.k3 > 0)) throw std::invalid_argument("Stribeck k3 must be > 0");
  return {p.k1, p.k2, std::log(p.k3), p.k4};
}

StribeckParamsd from_unconstrained(const Eigen::Vector4d& theta, double smoothing) {
  return {theta[0], theta[1], std::exp(theta[2]), theta[3], smoothing};
}

double stribeck_loss(const FrictionDataset& data, const Eigen::Vector4d& theta, Eigen::VectorXd& grad,
                     double smoothing) {
  if (data.size() == 0) throw std::invalid_argument("stribeck_loss: empty dataset");
  const double k1 = theta[0], k2 = theta[1], k3 = std::exp(theta[2]), k4 = theta[3];
  grad = Eigen::VectorXd::Zero(4);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double v = data.velocity[i];
    const double a = std::abs(v) / k3;
    const double e = std::exp(-a);
    const double t = std::tanh(smoothing * v);
    const double r = (k1 + k2 * e) * t + k4 * v - data.torque[i];
    loss += r * r;
    grad[0] += r * t;
    grad[1] += r * e * t;
    grad[2] += r * k2 * t * e * a;  // d/d(log k3) of exp(-|v|/k3)
    grad[3] += r * v;
  }
  const double n = double(data.size());
  grad *= 2.0 / n;
  return loss / n;
}

KnownFormFit fit_known_form(const FrictionDataset& data, const StribeckParamsd& init, const FitConfig& config) {
  data.validate();
  Eigen::VectorXd theta = to_unconstrained(init);
  Objective<double> objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    return stribeck_loss(data, x.head<4>(), grad, init.smoothing);
  };
  KnownFormFit fit;
  fit.trace = minimize(objective, theta, config);
  fit.params = from_unconstrained(theta.head<4>(), init.smoothing);
  return fit;
}

}  // namespace kanfric
