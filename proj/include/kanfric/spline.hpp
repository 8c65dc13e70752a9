#pragma once

/// @file spline.hpp
/// @brief Uniform knot grids and B-spline basis evaluation (Cox-de Boor).
///
/// A grid with G intervals over [lo, hi] and degree r carries G + 2r + 1
/// knots: the G + 1 interior knots plus r uniform steps on each side. This
/// yields G + r basis functions which form a partition of unity on [lo, hi].
/// Outside the extended knots every basis function is exactly zero.

#include <cmath>
#include <stdexcept>
#include <string>

#include "kanfric/types.hpp"

namespace kanfric {

template <typename Scalar>
struct SplineGrid {
  Scalar lower = Scalar(-1);
  Scalar upper = Scalar(1);
  int intervals = 0;  // G
  int order = 0;      // r (polynomial degree)
  VectorX<Scalar> knots;

  int basis_count() const { return intervals + order; }
  int knot_count() const { return intervals + 2 * order + 1; }

  template <typename Other>
  SplineGrid<Other> cast() const {
    return {static_cast<Other>(lower), static_cast<Other>(upper), intervals,
            order, knots.template cast<Other>()};
  }

  bool operator==(const SplineGrid& o) const {
    return lower == o.lower && upper == o.upper && intervals == o.intervals &&
           order == o.order && knots == o.knots;
  }
};

template <typename Scalar>
SplineGrid<Scalar> make_uniform_grid(Scalar lower, Scalar upper, int intervals,
                                     int order) {
  if (!(upper > lower) || !std::isfinite(static_cast<double>(lower)) ||
      !std::isfinite(static_cast<double>(upper)))
    throw std::invalid_argument("make_uniform_grid: degenerate interval");
  if (intervals < 1) throw std::invalid_argument("make_uniform_grid: G must be >= 1");
  if (order < 1) throw std::invalid_argument("make_uniform_grid: r must be >= 1");

  SplineGrid<Scalar> grid;
  grid.lower = lower;
  grid.upper = upper;
  grid.intervals = intervals;
  grid.order = order;
  grid.knots.resize(grid.knot_count());
  const Scalar h = (upper - lower) / Scalar(intervals);
  for (int k = 0; k < grid.knot_count(); ++k) {
    const int offset = k - order;
    // pin the interval endpoints exactly
    if (offset == 0)
      grid.knots[k] = lower;
    else if (offset == intervals)
      grid.knots[k] = upper;
    else
      grid.knots[k] = lower + Scalar(offset) * h;
  }
  return grid;
}

namespace detail {

// Cox-de Boor recursion over all knot spans up to `degree`. Returns the
// knot_count - 1 - degree basis values of that degree.
template <typename Scalar>
VectorX<Scalar> cox_de_boor(Scalar x, const VectorX<Scalar>& t, int degree) {
  const int spans = static_cast<int>(t.size()) - 1;
  VectorX<Scalar> n = VectorX<Scalar>::Zero(spans);
  for (int k = 0; k < spans; ++k)
    if (t[k] <= x && x < t[k + 1]) n[k] = Scalar(1);

  for (int d = 1; d <= degree; ++d) {
    const int count = spans - d;
    for (int m = 0; m < count; ++m) {
      Scalar left = Scalar(0), right = Scalar(0);
      const Scalar dl = t[m + d] - t[m];
      const Scalar dr = t[m + d + 1] - t[m + 1];
      if (dl != Scalar(0)) left = (x - t[m]) / dl * n[m];
      if (dr != Scalar(0)) right = (t[m + d + 1] - x) / dr * n[m + 1];
      n[m] = left + right;
    }
  }
  return n.head(spans - degree);
}

inline void require_finite(double x, const char* who) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

}  // namespace detail

/// Values of all G + r basis functions at x.
template <typename Scalar>
VectorX<Scalar> basis_all(Scalar x, const SplineGrid<Scalar>& grid) {
  detail::require_finite(static_cast<double>(x), "basis_all");
  return detail::cox_de_boor(x, grid.knots, grid.order);
}

/// d/dx of every basis function at x.
template <typename Scalar>
VectorX<Scalar> basis_all_derivative(Scalar x, const SplineGrid<Scalar>& grid) {
  detail::require_finite(static_cast<double>(x), "basis_all_derivative");
  const int r = grid.order;
  const auto& t = grid.knots;
  const VectorX<Scalar> lower = detail::cox_de_boor(x, t, r - 1);
  VectorX<Scalar> d(grid.basis_count());
  for (int m = 0; m < grid.basis_count(); ++m) {
    Scalar v = Scalar(0);
    const Scalar dl = t[m + r] - t[m];
    const Scalar dr = t[m + r + 1] - t[m + 1];
    if (dl != Scalar(0)) v += Scalar(r) / dl * lower[m];
    if (dr != Scalar(0)) v -= Scalar(r) / dr * lower[m + 1];
    d[m] = v;
  }
  return d;
}

/// Row-stacked basis values for a batch: result(n, m) = B_m(x[n]).
template <typename Derived>
MatrixX<typename Derived::Scalar> basis_matrix(
    const Eigen::MatrixBase<Derived>& x, const SplineGrid<typename Derived::Scalar>& grid) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(x.size(), grid.basis_count());
  for (Eigen::Index n = 0; n < x.size(); ++n) out.row(n) = basis_all(x(n), grid).transpose();
  return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> basis_derivative_matrix(
    const Eigen::MatrixBase<Derived>& x, const SplineGrid<typename Derived::Scalar>& grid) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(x.size(), grid.basis_count());
  for (Eigen::Index n = 0; n < x.size(); ++n)
    out.row(n) = basis_all_derivative(x(n), grid).transpose();
  return out;
}

}  // namespace kanfric
