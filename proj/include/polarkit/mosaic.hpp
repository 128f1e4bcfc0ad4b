// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_MOSAIC_HPP
#define POLARKIT_MOSAIC_HPP

#include <array>
#include <string>
#include <string_view>

#include "polarkit/stokes.hpp"

namespace polarkit {

enum class Orientation { deg0 = 0, deg45 = 1, deg90 = 2, deg135 = 3 };

int orientation_degrees(Orientation o) noexcept;
Orientation orientation_from_degrees(int degrees);

/// Orientation at each 2x2 superpixel position, in reading order:
/// (0,0), (0,1), (1,0), (1,1).
class MosaicLayout {
 public:
  /// 0/45 on the top row, 90/135 on the bottom row; i.e. 0, 45, 135, 90
  /// clockwise from the top-left.
  MosaicLayout();
  explicit MosaicLayout(const std::array<Orientation, 4>& reading_order);

  /// Parses "0,45,90,135" style lists (reading order).
  static MosaicLayout parse(std::string_view text);
  std::string to_string() const;

  Orientation at(int row, int col) const { return cells_[row * 2 + col]; }
  /// Superpixel (row, col) offset for an orientation.
  std::array<int, 2> offset_of(Orientation o) const;
  const std::array<Orientation, 4>& cells() const { return cells_; }

  bool operator==(const MosaicLayout&) const = default;

 private:
  std::array<Orientation, 4> cells_;
};

struct RawMosaicFrame {
  PlaneD samples;  // full sensor resolution
  MosaicLayout layout;

  Eigen::Index width() const { return samples.cols(); }
  Eigen::Index height() const { return samples.rows(); }
  void validate() const;
};

enum class InterpolationMethod { nearest, bilinear };

InterpolationMethod parse_interpolation(std::string_view name);

/// One plane per orientation at half resolution; no interpolation.
AngularIntensityStack<double> split_mosaic(const RawMosaicFrame& frame);

/// Inverse of split_mosaic.
RawMosaicFrame retile_mosaic(const AngularIntensityStack<double>& stack, const MosaicLayout& layout);

/// Full-resolution planes. Native sample positions keep their raw value;
/// other positions are filled from same-orientation neighbours with clamp-to-edge.
AngularIntensityStack<double> interpolate_full_res(const RawMosaicFrame& frame,
                                                   InterpolationMethod method);

}  // namespace polarkit

#endif  // POLARKIT_MOSAIC_HPP
