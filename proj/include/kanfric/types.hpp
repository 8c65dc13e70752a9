#pragma once

#include <Eigen/Core>

namespace kanfric {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Affine map y = scale * x + offset, used for input/output normalization.
template <typename Scalar>
struct AffineMap {
  Scalar scale = Scalar(1);
  Scalar offset = Scalar(0);

  Scalar apply(Scalar x) const { return scale * x + offset; }
  Scalar invert(Scalar y) const { return (y - offset) / scale; }

  /// Maps [lo, hi] onto [-1, 1]. A degenerate range only shifts.
  static AffineMap onto_unit(Scalar lo, Scalar hi) {
    if (!(hi > lo)) return {Scalar(1), -lo};
    return {Scalar(2) / (hi - lo), -(hi + lo) / (hi - lo)};
  }

  template <typename Other>
  AffineMap<Other> cast() const {
    return {static_cast<Other>(scale), static_cast<Other>(offset)};
  }

  bool operator==(const AffineMap&) const = default;
};

}  // namespace kanfric
