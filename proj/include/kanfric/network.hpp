#pragma once

/// @file network.hpp
/// @brief Kolmogorov-Arnold networks with B-spline edges.
///
/// Layer l maps the node outputs of node layer l (width l_i) to the pre-node
/// outputs of node layer l+1 (width l_o). Each edge (i, j) computes
///
///     mask_ij * ( S_ij * sum_m c_m^(i,j) B_m(x_j) + W_ij * silu(x_j) )
///
/// and pre-node i sums its incoming edges, optionally squashed by tanh
/// (hidden layers). Additive nodes forward their pre-node; multiplicative
/// node k multiplies pre-nodes additive + 2k and additive + 2k + 1. Node
/// masks are applied after the combination.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kanfric/arch.hpp"
#include "kanfric/spline.hpp"
#include "kanfric/types.hpp"

namespace kanfric {

template <typename Scalar>
Scalar silu(Scalar x) {
  return x / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
Scalar silu_derivative(Scalar x) {
  const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-x));
  return s * (Scalar(1) + x * (Scalar(1) - s));
}

template <typename Scalar>
struct KanLayer {
  int in_width = 0;
  int out_width = 0;
  std::vector<SplineGrid<Scalar>> grids;  // one per input
  std::vector<MatrixX<Scalar>> coeffs;    // per input j: [out_width x basis_count_j]
  MatrixX<Scalar> base_weight;            // [out_width x in_width]
  MatrixX<Scalar> spline_scaler;          // [out_width x in_width]
  MatrixX<Scalar> edge_mask;              // [out_width x in_width], entries 0 or 1
  bool squash = false;

  bool edge_active(int i, int j) const { return edge_mask(i, j) != Scalar(0); }

  /// Throws std::invalid_argument if any member disagrees with the widths.
  void check_shapes() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("KanLayer: " + what); };
    if (in_width < 1 || out_width < 1) fail("widths must be positive");
    if (static_cast<int>(grids.size()) != in_width) fail("one grid per input required");
    if (static_cast<int>(coeffs.size()) != in_width) fail("one coefficient block per input required");
    for (int j = 0; j < in_width; ++j)
      if (coeffs[j].rows() != out_width || coeffs[j].cols() != grids[j].basis_count())
        fail("coefficient block " + std::to_string(j) + " has wrong shape");
    for (const auto* m : {&base_weight, &spline_scaler, &edge_mask})
      if (m->rows() != out_width || m->cols() != in_width) fail("edge matrix has wrong shape");
  }

  template <typename Other>
  KanLayer<Other> cast() const {
    KanLayer<Other> out;
    out.in_width = in_width;
    out.out_width = out_width;
    for (const auto& g : grids) out.grids.push_back(g.template cast<Other>());
    for (const auto& c : coeffs) out.coeffs.push_back(c.template cast<Other>());
    out.base_weight = base_weight.template cast<Other>();
    out.spline_scaler = spline_scaler.template cast<Other>();
    out.edge_mask = edge_mask.template cast<Other>();
    out.squash = squash;
    return out;
  }
};

template <typename Scalar>
struct KanNetwork {
  ArchSpec arch;
  std::vector<KanLayer<Scalar>> layers;
  std::vector<VectorX<Scalar>> node_masks;  // one per node layer, inputs through outputs
  std::vector<AffineMap<Scalar>> input_norm;
  std::vector<AffineMap<Scalar>> output_norm;
  std::uint64_t seed = 0;

  int inputs() const { return arch.inputs(); }
  int outputs() const { return arch.outputs(); }

  void check_shapes() const {
    arch.validate();
    if (static_cast<int>(layers.size()) != arch.depth())
      throw std::invalid_argument("KanNetwork: layer count disagrees with arch");
    if (static_cast<int>(node_masks.size()) != arch.depth() + 1)
      throw std::invalid_argument("KanNetwork: one node mask per node layer required");
    for (int l = 0; l < arch.depth(); ++l) {
      layers[l].check_shapes();
      if (layers[l].in_width != arch.layers[l].nodes() ||
          layers[l].out_width != arch.layers[l + 1].pre_nodes())
        throw std::invalid_argument("KanNetwork: layer " + std::to_string(l) +
                                    " widths disagree with arch");
    }
    for (int l = 0; l <= arch.depth(); ++l)
      if (node_masks[l].size() != arch.layers[l].nodes())
        throw std::invalid_argument("KanNetwork: node mask " + std::to_string(l) + " has wrong size");
    if (static_cast<int>(input_norm.size()) != inputs() ||
        static_cast<int>(output_norm.size()) != outputs())
      throw std::invalid_argument("KanNetwork: normalization size mismatch");
  }

  template <typename Other>
  KanNetwork<Other> cast() const {
    KanNetwork<Other> out;
    out.arch = arch;
    for (const auto& l : layers) out.layers.push_back(l.template cast<Other>());
    for (const auto& m : node_masks) out.node_masks.push_back(m.template cast<Other>());
    for (const auto& a : input_norm) out.input_norm.push_back(a.template cast<Other>());
    for (const auto& a : output_norm) out.output_norm.push_back(a.template cast<Other>());
    out.seed = seed;
    return out;
  }
};

using KanLayerd = KanLayer<double>;
using KanNetworkd = KanNetwork<double>;

/// Fresh network: splines ~ N(0, (0.1/sqrt(G+r))^2), base weights uniform in
/// +-1/sqrt(fan_in), scalers one, all masks one, identity normalization.
/// Every layer's grids span [-1, 1]; hidden layers squash with tanh.
template <typename Scalar = double>
KanNetwork<Scalar> init_network(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  const int basis = arch.grid + arch.order;
  std::normal_distribution<double> spline_noise(0.0, 0.1 / std::sqrt(double(basis)));

  KanNetwork<Scalar> net;
  net.arch = arch;
  net.seed = seed;
  const auto grid = make_uniform_grid<Scalar>(Scalar(-1), Scalar(1), arch.grid, arch.order);
  for (int l = 0; l < arch.depth(); ++l) {
    KanLayer<Scalar> layer;
    layer.in_width = arch.layers[l].nodes();
    layer.out_width = arch.layers[l + 1].pre_nodes();
    layer.squash = l + 1 < arch.depth();
    layer.grids.assign(layer.in_width, grid);
    for (int j = 0; j < layer.in_width; ++j) {
      MatrixX<Scalar> c(layer.out_width, basis);
      for (int i = 0; i < layer.out_width; ++i)
        for (int m = 0; m < basis; ++m) c(i, m) = Scalar(spline_noise(rng));
      layer.coeffs.push_back(std::move(c));
    }
    const double bound = 1.0 / std::sqrt(double(layer.in_width));
    std::uniform_real_distribution<double> base_init(-bound, bound);
    layer.base_weight.resize(layer.out_width, layer.in_width);
    for (int i = 0; i < layer.out_width; ++i)
      for (int j = 0; j < layer.in_width; ++j) layer.base_weight(i, j) = Scalar(base_init(rng));
    layer.spline_scaler = MatrixX<Scalar>::Ones(layer.out_width, layer.in_width);
    layer.edge_mask = MatrixX<Scalar>::Ones(layer.out_width, layer.in_width);
    net.layers.push_back(std::move(layer));
  }
  for (int l = 0; l <= arch.depth(); ++l)
    net.node_masks.push_back(VectorX<Scalar>::Ones(arch.layers[l].nodes()));
  net.input_norm.assign(arch.inputs(), AffineMap<Scalar>{});
  net.output_norm.assign(arch.outputs(), AffineMap<Scalar>{});
  return net;
}

/// Intermediate values of one layer evaluation, kept for backpropagation.
template <typename Scalar>
struct LayerCache {
  MatrixX<Scalar> input;                 // [N x l_i]
  std::vector<MatrixX<Scalar>> basis;    // per input: [N x basis_j]
  std::vector<MatrixX<Scalar>> spline;   // per input: [N x l_o], unscaled phi_ij(x_j)
  MatrixX<Scalar> base;                  // [N x l_i], silu(x_j)
  MatrixX<Scalar> output;                // [N x l_o], after optional squash
};

namespace detail {

template <typename Scalar>
void check_batch(const MatrixX<Scalar>& x, int width, const char* who) {
  if (x.cols() != width)
    throw std::invalid_argument(std::string(who) + ": expected width " + std::to_string(width) +
                                ", got " + std::to_string(x.cols()));
  if (!x.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

}  // namespace detail

template <typename Scalar>
LayerCache<Scalar> layer_forward_cached(const MatrixX<Scalar>& x, const KanLayer<Scalar>& layer) {
  detail::check_batch(x, layer.in_width, "layer_forward");
  const Eigen::Index n = x.rows();
  LayerCache<Scalar> cache;
  cache.input = x;
  cache.base = x.unaryExpr([](Scalar v) { return silu(v); });
  MatrixX<Scalar> z = MatrixX<Scalar>::Zero(n, layer.out_width);
  for (int j = 0; j < layer.in_width; ++j) {
    cache.basis.push_back(basis_matrix(x.col(j), layer.grids[j]));
    cache.spline.push_back(cache.basis[j] * layer.coeffs[j].transpose());
    const RowVectorX<Scalar> s = layer.spline_scaler.col(j).cwiseProduct(layer.edge_mask.col(j)).transpose();
    const RowVectorX<Scalar> w = layer.base_weight.col(j).cwiseProduct(layer.edge_mask.col(j)).transpose();
    z.noalias() += cache.spline[j] * s.asDiagonal();
    z.noalias() += cache.base.col(j) * w;
  }
  cache.output = layer.squash ? MatrixX<Scalar>(z.array().tanh()) : z;
  return cache;
}

/// Batch evaluation of one layer: rows are samples.
template <typename Scalar>
MatrixX<Scalar> layer_forward(const MatrixX<Scalar>& x, const KanLayer<Scalar>& layer) {
  return layer_forward_cached(x, layer).output;
}

/// Output of edge (i, j) over a batch of layer inputs, mask included.
template <typename Scalar>
VectorX<Scalar> edge_forward(const VectorX<Scalar>& xj, const KanLayer<Scalar>& layer, int i, int j) {
  const Scalar mask = layer.edge_mask(i, j);
  VectorX<Scalar> out(xj.size());
  const auto& grid = layer.grids[j];
  for (Eigen::Index n = 0; n < xj.size(); ++n) {
    const Scalar phi = basis_all(xj[n], grid).dot(layer.coeffs[j].row(i).transpose());
    out[n] = mask * (layer.spline_scaler(i, j) * phi + layer.base_weight(i, j) * silu(xj[n]));
  }
  return out;
}

/// Combines pre-node outputs of node layer spec into node outputs.
template <typename Scalar>
MatrixX<Scalar> combine_nodes(const MatrixX<Scalar>& pre, const NodeSpec& spec, const VectorX<Scalar>& mask) {
  MatrixX<Scalar> out(pre.rows(), spec.nodes());
  out.leftCols(spec.additive) = pre.leftCols(spec.additive);
  for (int k = 0; k < spec.multiplicative; ++k)
    out.col(spec.additive + k) =
        pre.col(spec.additive + 2 * k).cwiseProduct(pre.col(spec.additive + 2 * k + 1));
  return out * mask.asDiagonal();
}

template <typename Scalar>
struct ForwardCache {
  std::vector<LayerCache<Scalar>> layers;
  std::vector<MatrixX<Scalar>> nodes;  // node outputs per node layer (normalized domain)
  MatrixX<Scalar> prediction;          // de-normalized outputs
};

template <typename Scalar>
ForwardCache<Scalar> network_forward_cached(const MatrixX<Scalar>& v, const KanNetwork<Scalar>& net) {
  detail::check_batch(v, net.inputs(), "network_forward");
  ForwardCache<Scalar> cache;
  MatrixX<Scalar> x(v.rows(), v.cols());
  for (int j = 0; j < net.inputs(); ++j)
    x.col(j) = v.col(j).unaryExpr([&](Scalar a) { return net.input_norm[j].apply(a); });
  cache.nodes.push_back(x * net.node_masks[0].asDiagonal());
  for (int l = 0; l < net.arch.depth(); ++l) {
    cache.layers.push_back(layer_forward_cached(cache.nodes.back(), net.layers[l]));
    cache.nodes.push_back(
        combine_nodes(cache.layers.back().output, net.arch.layers[l + 1], net.node_masks[l + 1]));
  }
  cache.prediction = cache.nodes.back();
  for (int o = 0; o < net.outputs(); ++o)
    cache.prediction.col(o) =
        cache.nodes.back().col(o).unaryExpr([&](Scalar y) { return net.output_norm[o].invert(y); });
  return cache;
}

/// Batch evaluation: rows of `v` are input vectors in physical units.
template <typename Scalar>
MatrixX<Scalar> network_forward(const MatrixX<Scalar>& v, const KanNetwork<Scalar>& net) {
  return network_forward_cached(v, net).prediction;
}

template <typename Scalar>
VectorX<Scalar> network_forward(const VectorX<Scalar>& v, const KanNetwork<Scalar>& net) {
  if (net.inputs() != 1 || net.outputs() != 1)
    throw std::invalid_argument("network_forward: vector overload needs a 1-in/1-out network");
  return network_forward(MatrixX<Scalar>(v), net).col(0);
}

struct LayerParameterCount {
  long spline = 0;
  long base = 0;
  long scaler = 0;
  long total() const { return spline + base + scaler; }
  bool operator==(const LayerParameterCount&) const = default;
};

/// Trainable parameter counts per layer: l_o*l_i*(G+r) spline weights,
/// l_i*l_o base weights and l_i*l_o scalers.
template <typename Scalar>
std::vector<LayerParameterCount> count_parameters(const KanNetwork<Scalar>& net) {
  std::vector<LayerParameterCount> out;
  for (const auto& layer : net.layers) {
    LayerParameterCount c;
    for (const auto& block : layer.coeffs) c.spline += block.size();
    c.base = static_cast<long>(layer.in_width) * layer.out_width;
    c.scaler = c.base;
    out.push_back(c);
  }
  return out;
}

/// Refits normalization so the observed input range maps onto [-1, 1] and
/// the target range onto [-1, 1].
template <typename Scalar>
void fit_normalization(KanNetwork<Scalar>& net, const MatrixX<Scalar>& inputs, const MatrixX<Scalar>& targets) {
  for (int j = 0; j < net.inputs(); ++j)
    net.input_norm[j] = AffineMap<Scalar>::onto_unit(inputs.col(j).minCoeff(), inputs.col(j).maxCoeff());
  for (int o = 0; o < net.outputs(); ++o)
    net.output_norm[o] = AffineMap<Scalar>::onto_unit(targets.col(o).minCoeff(), targets.col(o).maxCoeff());
}

}  // namespace kanfric
