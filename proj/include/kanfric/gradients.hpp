#pragma once

/// @file gradients.hpp
/// @brief Exact MSE gradients for KanNetwork by reverse accumulation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kanfric/network.hpp"

namespace kanfric {

template <typename Scalar>
struct LayerGradient {
  std::vector<MatrixX<Scalar>> coeffs;  // mirrors KanLayer::coeffs
  MatrixX<Scalar> base_weight;
  MatrixX<Scalar> spline_scaler;
};

template <typename Scalar>
struct GradientSet {
  std::vector<LayerGradient<Scalar>> layers;
};

namespace detail {

// Backpropagates d(loss)/d(layer output) through one layer. Accumulates
// parameter gradients into `grad` and returns d(loss)/d(layer input).
template <typename Scalar>
MatrixX<Scalar> layer_backward(const KanLayer<Scalar>& layer, const LayerCache<Scalar>& cache,
                               const MatrixX<Scalar>& d_output, LayerGradient<Scalar>& grad,
                               bool need_input_grad) {
  MatrixX<Scalar> dz = d_output;
  if (layer.squash) dz.array() *= (Scalar(1) - cache.output.array().square());

  const Eigen::Index n = dz.rows();
  MatrixX<Scalar> dx = MatrixX<Scalar>::Zero(n, layer.in_width);
  grad.coeffs.resize(layer.in_width);
  grad.base_weight.resize(layer.out_width, layer.in_width);
  grad.spline_scaler.resize(layer.out_width, layer.in_width);
  for (int j = 0; j < layer.in_width; ++j) {
    const VectorX<Scalar> sm = layer.spline_scaler.col(j).cwiseProduct(layer.edge_mask.col(j));
    const VectorX<Scalar> wm = layer.base_weight.col(j).cwiseProduct(layer.edge_mask.col(j));
    // dL/dc_ij = mask S_ij B_j^T dz_i
    grad.coeffs[j] = sm.asDiagonal() * (dz.transpose() * cache.basis[j]);
    grad.spline_scaler.col(j) =
        (cache.spline[j].cwiseProduct(dz)).colwise().sum().transpose().cwiseProduct(layer.edge_mask.col(j));
    grad.base_weight.col(j) = (dz.transpose() * cache.base.col(j)).cwiseProduct(layer.edge_mask.col(j));

    if (need_input_grad) {
      const auto& grid = layer.grids[j];
      for (Eigen::Index s = 0; s < n; ++s) {
        const Scalar xj = cache.input(s, j);
        const VectorX<Scalar> dphi = layer.coeffs[j] * basis_all_derivative(xj, grid);
        dx(s, j) = dz.row(s).dot(sm.cwiseProduct(dphi) + wm * silu_derivative(xj));
      }
    }
  }
  return dx;
}

// d(loss)/d(node outputs) -> d(loss)/d(pre-node outputs).
template <typename Scalar>
MatrixX<Scalar> split_nodes_backward(const MatrixX<Scalar>& d_nodes, const MatrixX<Scalar>& pre,
                                     const NodeSpec& spec, const VectorX<Scalar>& mask) {
  const MatrixX<Scalar> dm = d_nodes * mask.asDiagonal();
  MatrixX<Scalar> d_pre(pre.rows(), spec.pre_nodes());
  d_pre.leftCols(spec.additive) = dm.leftCols(spec.additive);
  for (int k = 0; k < spec.multiplicative; ++k) {
    const int a = spec.additive + 2 * k;
    d_pre.col(a) = dm.col(spec.additive + k).cwiseProduct(pre.col(a + 1));
    d_pre.col(a + 1) = dm.col(spec.additive + k).cwiseProduct(pre.col(a));
  }
  return d_pre;
}

}  // namespace detail

/// Gradients of a generic loss given d(loss)/d(prediction) for a cached pass.
template <typename Scalar>
GradientSet<Scalar> backpropagate(const KanNetwork<Scalar>& net, const ForwardCache<Scalar>& cache,
                                  const MatrixX<Scalar>& d_prediction) {
  MatrixX<Scalar> d_nodes = d_prediction;
  for (int o = 0; o < net.outputs(); ++o) d_nodes.col(o) /= net.output_norm[o].scale;

  GradientSet<Scalar> grads;
  grads.layers.resize(net.layers.size());
  for (int l = net.arch.depth() - 1; l >= 0; --l) {
    const auto& lc = cache.layers[l];
    const MatrixX<Scalar> d_pre =
        detail::split_nodes_backward(d_nodes, lc.output, net.arch.layers[l + 1], net.node_masks[l + 1]);
    d_nodes = detail::layer_backward(net.layers[l], lc, d_pre, grads.layers[l], l > 0);
  }
  return grads;
}

template <typename Scalar>
struct LossAndGradients {
  Scalar mse = Scalar(0);
  GradientSet<Scalar> grads;
};

/// mse = mean over samples and outputs of (prediction - target)^2, with its
/// exact gradient with respect to every spline coefficient, base weight and
/// scaler.
template <typename Scalar>
LossAndGradients<Scalar> loss_and_gradients(const KanNetwork<Scalar>& net, const MatrixX<Scalar>& inputs,
                                            const MatrixX<Scalar>& targets) {
  if (inputs.rows() == 0) throw std::invalid_argument("loss_and_gradients: empty dataset");
  if (targets.rows() != inputs.rows() || targets.cols() != net.outputs())
    throw std::invalid_argument("loss_and_gradients: target shape mismatch");
  const auto cache = network_forward_cached(inputs, net);
  const MatrixX<Scalar> residual = cache.prediction - targets;
  const Scalar count = Scalar(residual.size());
  LossAndGradients<Scalar> out;
  out.mse = residual.squaredNorm() / count;
  out.grads = backpropagate(net, cache, MatrixX<Scalar>(residual * (Scalar(2) / count)));
  return out;
}

template <typename Scalar>
Scalar mse_loss(const KanNetwork<Scalar>& net, const MatrixX<Scalar>& inputs, const MatrixX<Scalar>& targets) {
  return (network_forward(inputs, net) - targets).squaredNorm() / Scalar(targets.size());
}

// Flat parameter layout, per layer: coefficient blocks (input j, then row i,
// then basis m), then base_weight and spline_scaler in row-major order.

template <typename Scalar>
Eigen::Index parameter_count(const KanNetwork<Scalar>& net) {
  Eigen::Index total = 0;
  for (const auto& c : count_parameters(net)) total += c.total();
  return total;
}

namespace detail {

template <typename Scalar, typename Visit>
void visit_parameters(const KanNetwork<Scalar>& net, Visit&& visit) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    for (int j = 0; j < layer.in_width; ++j)
      for (int i = 0; i < layer.out_width; ++i)
        for (Eigen::Index m = 0; m < layer.coeffs[j].cols(); ++m) visit(l, 0, i, j, m);
    for (int i = 0; i < layer.out_width; ++i)
      for (int j = 0; j < layer.in_width; ++j) visit(l, 1, i, j, Eigen::Index(0));
    for (int i = 0; i < layer.out_width; ++i)
      for (int j = 0; j < layer.in_width; ++j) visit(l, 2, i, j, Eigen::Index(0));
  }
}

}  // namespace detail

template <typename Scalar>
VectorX<Scalar> pack_parameters(const KanNetwork<Scalar>& net) {
  VectorX<Scalar> out(parameter_count(net));
  Eigen::Index k = 0;
  detail::visit_parameters(net, [&](std::size_t l, int kind, int i, int j, Eigen::Index m) {
    const auto& layer = net.layers[l];
    out[k++] = kind == 0 ? layer.coeffs[j](i, m) : kind == 1 ? layer.base_weight(i, j) : layer.spline_scaler(i, j);
  });
  return out;
}

template <typename Scalar>
void unpack_parameters(const VectorX<Scalar>& flat, KanNetwork<Scalar>& net) {
  if (flat.size() != parameter_count(net)) throw std::invalid_argument("unpack_parameters: size mismatch");
  Eigen::Index k = 0;
  detail::visit_parameters(net, [&](std::size_t l, int kind, int i, int j, Eigen::Index m) {
    auto& layer = net.layers[l];
    Scalar& slot = kind == 0 ? layer.coeffs[j](i, m) : kind == 1 ? layer.base_weight(i, j) : layer.spline_scaler(i, j);
    slot = flat[k++];
  });
}

template <typename Scalar>
VectorX<Scalar> pack_gradients(const KanNetwork<Scalar>& net, const GradientSet<Scalar>& grads) {
  VectorX<Scalar> out(parameter_count(net));
  Eigen::Index k = 0;
  detail::visit_parameters(net, [&](std::size_t l, int kind, int i, int j, Eigen::Index m) {
    const auto& g = grads.layers[l];
    out[k++] = kind == 0 ? g.coeffs[j](i, m) : kind == 1 ? g.base_weight(i, j) : g.spline_scaler(i, j);
  });
  return out;
}

/// Flat mask: 1 where the parameter belongs to an active edge.
template <typename Scalar>
VectorX<Scalar> active_parameter_mask(const KanNetwork<Scalar>& net) {
  VectorX<Scalar> out(parameter_count(net));
  Eigen::Index k = 0;
  detail::visit_parameters(net, [&](std::size_t l, int, int i, int j, Eigen::Index) {
    out[k++] = net.layers[l].edge_mask(i, j);
  });
  return out;
}

struct GradientCheckReport {
  double max_relative_deviation = 0.0;
  long worst_index = -1;
  long checked = 0;
  bool passed = true;
};

/// Compares `analytic` against central differences of `loss` at `params`.
/// Entries whose absolute difference is below `abs_floor` count as exact;
/// otherwise the deviation is |a - fd| / max(|a|, |fd|). Entries where
/// `active` is zero are skipped.
template <typename Scalar>
GradientCheckReport compare_with_finite_differences(
    const std::function<Scalar(const VectorX<Scalar>&)>& loss, const VectorX<Scalar>& params,
    const VectorX<Scalar>& analytic, const VectorX<Scalar>& active, Scalar step, double tolerance,
    double abs_floor = 1e-8) {
  GradientCheckReport report;
  VectorX<Scalar> probe = params;
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    if (active[k] == Scalar(0)) continue;
    probe[k] = params[k] + step;
    const Scalar up = loss(probe);
    probe[k] = params[k] - step;
    const Scalar down = loss(probe);
    probe[k] = params[k];
    const double fd = static_cast<double>((up - down) / (Scalar(2) * step));
    const double a = static_cast<double>(analytic[k]);
    const double diff = std::abs(a - fd);
    const double dev = diff <= abs_floor ? 0.0 : diff / std::max(std::abs(a), std::abs(fd));
    ++report.checked;
    if (report.worst_index < 0 || dev > report.max_relative_deviation) {
      report.worst_index = static_cast<long>(k);
      report.max_relative_deviation = dev;
    }
  }
  report.passed = report.max_relative_deviation <= tolerance;
  return report;
}

/// Finite-difference audit of loss_and_gradients on (inputs, targets).
/// `corrupt` lets tests tamper with the analytic gradient before comparison.
template <typename Scalar>
GradientCheckReport gradient_check(const KanNetwork<Scalar>& net, const MatrixX<Scalar>& inputs,
                                   const MatrixX<Scalar>& targets, Scalar step, double tolerance,
                                   const std::function<void(VectorX<Scalar>&)>& corrupt = {}) {
  if (!(step > Scalar(0))) throw std::invalid_argument("gradient_check: step must be positive");
  const auto result = loss_and_gradients(net, inputs, targets);
  VectorX<Scalar> analytic = pack_gradients(net, result.grads);
  if (corrupt) corrupt(analytic);
  KanNetwork<Scalar> scratch = net;
  auto loss = [&](const VectorX<Scalar>& p) {
    unpack_parameters(p, scratch);
    return mse_loss(scratch, inputs, targets);
  };
  return compare_with_finite_differences<Scalar>(loss, pack_parameters(net), analytic,
                                                 active_parameter_mask(net), step, tolerance);
}

}  // namespace kanfric
