#pragma once

/// @file training.hpp
/// @brief Fits a KanNetwork to (inputs, targets) with the optimizers module.

#include <functional>

#include "kanfric/gradients.hpp"
#include "kanfric/optimizers.hpp"

namespace kanfric {

/// Network counterpart of IterationCallback.
template <typename Scalar>
using NetworkCallback = std::function<void(int iteration, const KanNetwork<Scalar>& net)>;

/// Minimizes the MSE of `net` in place. Normalization maps are left as they
/// are; call fit_normalization first for a fresh network.
template <typename Scalar>
FitTrace fit_network(KanNetwork<Scalar>& net, const MatrixX<Scalar>& inputs, const MatrixX<Scalar>& targets,
                     const FitConfig& config, const NetworkCallback<Scalar>& on_iteration = {}) {
  if (inputs.rows() == 0) throw std::invalid_argument("fit_network: empty dataset");
  KanNetwork<Scalar> scratch = net;
  Objective<Scalar> objective = [&](const VectorX<Scalar>& p, VectorX<Scalar>& grad) {
    unpack_parameters(p, scratch);
    auto result = loss_and_gradients(scratch, inputs, targets);
    grad = pack_gradients(scratch, result.grads);
    return result.mse;
  };
  IterationCallback<Scalar> callback;
  if (on_iteration)
    callback = [&](int k, const VectorX<Scalar>& p) {
      unpack_parameters(p, scratch);
      on_iteration(k, scratch);
    };
  VectorX<Scalar> params = pack_parameters(net);
  try {
    auto trace = minimize(objective, params, config, callback);
    unpack_parameters(params, net);
    return trace;
  } catch (const DivergedError&) {
    unpack_parameters(params, net);
    throw;
  }
}

}  // namespace kanfric
