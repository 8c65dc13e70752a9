#pragma once

// Shared helpers for the unit tests and the acceptance binary.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "kanfric/network.hpp"

namespace kanfric::testing {

/// Cardinal B-spline of degree r on [0, r + 1] by the truncated-power
/// formula, independent of the recursive evaluation under test.
inline double cardinal_bspline(double u, int r) {
  double sum = 0.0, binom = 1.0, fact = 1.0;
  for (int k = 1; k <= r; ++k) fact *= k;
  for (int k = 0; k <= r + 1; ++k) {
    if (k > 0) binom = binom * (r + 2 - k) / k;
    const double d = u - k;
    if (d > 0) sum += (k % 2 ? -1.0 : 1.0) * binom * std::pow(d, r);
  }
  return u <= 0 || u >= r + 1 ? 0.0 : sum / fact;
}

/// B_m on a uniform grid: translate of the cardinal spline.
inline double uniform_basis(double x, const SplineGrid<double>& g, int m) {
  const double h = (g.upper - g.lower) / g.intervals;
  const double t_m = g.lower + (m - g.order) * h;
  return cardinal_bspline((x - t_m) / h, g.order);
}

inline double scalar_silu(double x) { return x / (1.0 + std::exp(-x)); }

/// phi(x) of edge (i, j) evaluated with the independent basis.
inline double scalar_edge(const KanLayer<double>& layer, int i, int j, double x) {
  const auto& g = layer.grids[j];
  double phi = 0.0;
  for (int m = 0; m < g.basis_count(); ++m) phi += layer.coeffs[j](i, m) * uniform_basis(x, g, m);
  return layer.edge_mask(i, j) * (layer.spline_scaler(i, j) * phi + layer.base_weight(i, j) * scalar_silu(x));
}

/// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("kanfric_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

/// Random architecture with 1..2 inputs, 1..2 hidden layers that may carry
/// multiplicative nodes, and one output.
inline ArchSpec random_arch(std::mt19937_64& rng, bool allow_mult = true) {
  std::uniform_int_distribution<int> width(1, 3), mult(0, allow_mult ? 2 : 0), depth(1, 2), grid(2, 6),
      order(1, 3), ins(1, 2);
  ArchSpec a;
  a.layers.push_back({ins(rng), 0});
  const int hidden = depth(rng);
  for (int h = 0; h < hidden; ++h) a.layers.push_back({width(rng), mult(rng)});
  a.layers.push_back({1, 0});
  a.grid = grid(rng);
  a.order = order(rng);
  return a;
}

}  // namespace kanfric::testing
