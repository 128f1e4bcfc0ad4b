// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_PLANE_HPP
#define POLARKIT_PLANE_HPP

#include <Eigen/Dense>

namespace polarkit {

/// Row-major image plane: rows() is height, cols() is width.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PlaneD = Plane<double>;
using Mask = Plane<bool>;

template <typename A, typename B>
bool same_shape(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace polarkit

#endif  // POLARKIT_PLANE_HPP
