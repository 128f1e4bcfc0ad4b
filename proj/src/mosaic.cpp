// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/mosaic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace polarkit {

int orientation_degrees(Orientation o) noexcept {
  return static_cast<int>(o) * 45;
}

Orientation orientation_from_degrees(int degrees) {
  switch (degrees) {
    case 0: return Orientation::deg0;
    case 45: return Orientation::deg45;
    case 90: return Orientation::deg90;
    case 135: return Orientation::deg135;
    default:
      fail(ErrorKind::format, "unsupported polarizer orientation " + std::to_string(degrees));
  }
}

MosaicLayout::MosaicLayout()
    : cells_{Orientation::deg0, Orientation::deg45, Orientation::deg90, Orientation::deg135} {}

MosaicLayout::MosaicLayout(const std::array<Orientation, 4>& reading_order) : cells_(reading_order) {
  std::array<int, 4> seen{};
  for (auto o : cells_) ++seen[static_cast<int>(o)];
  for (int n : seen) {
    require(n == 1, ErrorKind::format,
            "mosaic layout must assign each orientation to exactly one superpixel position");
  }
}

MosaicLayout MosaicLayout::parse(std::string_view text) {
  std::array<Orientation, 4> cells{};
  std::string token;
  std::istringstream in{std::string(text)};
  int n = 0;
  while (std::getline(in, token, ',')) {
    require(n < 4, ErrorKind::format, "mosaic layout has more than four entries");
    try {
      std::size_t used = 0;
      const int degrees = std::stoi(token, &used);
      require(token.find_first_not_of(" \t", used) == std::string::npos, ErrorKind::format,
              "bad mosaic layout entry '" + token + "'");
      cells[n++] = orientation_from_degrees(degrees);
    } catch (const std::logic_error&) {
      fail(ErrorKind::format, "bad mosaic layout entry '" + token + "'");
    }
  }
  require(n == 4, ErrorKind::format, "mosaic layout needs four entries");
  return MosaicLayout(cells);
}

std::string MosaicLayout::to_string() const {
  std::string out;
  for (int i = 0; i < 4; ++i) {
    if (i) out += ',';
    out += std::to_string(orientation_degrees(cells_[i]));
  }
  return out;
}

std::array<int, 2> MosaicLayout::offset_of(Orientation o) const {
  for (int i = 0; i < 4; ++i) {
    if (cells_[i] == o) return {i / 2, i % 2};
  }
  fail(ErrorKind::format, "orientation missing from layout");
}

void RawMosaicFrame::validate() const {
  require(width() % 2 == 0 && height() % 2 == 0, ErrorKind::structural,
          "mosaic frame dimensions must be even, got " + std::to_string(width()) + "x" +
              std::to_string(height()));
  require(width() > 0 && height() > 0, ErrorKind::structural, "mosaic frame is empty");
}

InterpolationMethod parse_interpolation(std::string_view name) {
  if (name == "nearest") return InterpolationMethod::nearest;
  if (name == "bilinear") return InterpolationMethod::bilinear;
  fail(ErrorKind::usage, "unknown interpolation method '" + std::string(name) + "'");
}

namespace {

PlaneD& plane_for(AngularIntensityStack<double>& stack, Orientation o) {
  switch (o) {
    case Orientation::deg0: return stack.i0;
    case Orientation::deg45: return stack.i45;
    case Orientation::deg90: return stack.i90;
    case Orientation::deg135: return stack.i135;
  }
  return stack.i0;
}

const PlaneD& plane_for(const AngularIntensityStack<double>& stack, Orientation o) {
  return plane_for(const_cast<AngularIntensityStack<double>&>(stack), o);
}

constexpr std::array<Orientation, 4> kAllOrientations = {
    Orientation::deg0, Orientation::deg45, Orientation::deg90, Orientation::deg135};

}  // namespace

AngularIntensityStack<double> split_mosaic(const RawMosaicFrame& frame) {
  frame.validate();
  AngularIntensityStack<double> stack;
  const Eigen::Index h = frame.height() / 2, w = frame.width() / 2;
  for (auto o : kAllOrientations) {
    const auto [dr, dc] = frame.layout.offset_of(o);
    // Strided gather: every second row/column starting at the superpixel offset.
    plane_for(stack, o) = Eigen::Map<const PlaneD, 0, Eigen::Stride<Eigen::Dynamic, 2>>(
        frame.samples.data() + dr * frame.width() + dc, h, w,
        Eigen::Stride<Eigen::Dynamic, 2>(2 * frame.width(), 2));
  }
  return stack;
}

RawMosaicFrame retile_mosaic(const AngularIntensityStack<double>& stack, const MosaicLayout& layout) {
  require(same_shape(stack.i0, stack.i45) && same_shape(stack.i0, stack.i90) &&
              same_shape(stack.i0, stack.i135),
          ErrorKind::structural, "intensity planes differ in dimensions");
  RawMosaicFrame frame{PlaneD(stack.height() * 2, stack.width() * 2), layout};
  for (auto o : kAllOrientations) {
    const auto [dr, dc] = layout.offset_of(o);
    Eigen::Map<PlaneD, 0, Eigen::Stride<Eigen::Dynamic, 2>>(
        frame.samples.data() + dr * frame.width() + dc, stack.height(), stack.width(),
        Eigen::Stride<Eigen::Dynamic, 2>(2 * frame.width(), 2)) = plane_for(stack, o);
  }
  return frame;
}

AngularIntensityStack<double> interpolate_full_res(const RawMosaicFrame& frame,
                                                   InterpolationMethod method) {
  const AngularIntensityStack<double> half = split_mosaic(frame);
  const Eigen::Index H = frame.height(), W = frame.width();
  const Eigen::Index h = H / 2, w = W / 2;

  AngularIntensityStack<double> full;
  for (auto o : kAllOrientations) {
    const PlaneD& src = plane_for(half, o);
    PlaneD& dst = plane_for(full, o);
    dst.resize(H, W);
    const auto [dr, dc] = frame.layout.offset_of(o);
    for (Eigen::Index r = 0; r < H; ++r) {
      // Position of this row in the half-resolution grid of this orientation.
      const double u = 0.5 * double(r - dr);
      for (Eigen::Index c = 0; c < W; ++c) {
        const double v = 0.5 * double(c - dc);
        if (method == InterpolationMethod::nearest) {
          const Eigen::Index i = std::clamp<Eigen::Index>(Eigen::Index(std::floor(u)), 0, h - 1);
          const Eigen::Index j = std::clamp<Eigen::Index>(Eigen::Index(std::floor(v)), 0, w - 1);
          dst(r, c) = src(i, j);
          continue;
        }
        const double uc = std::clamp(u, 0.0, double(h - 1));
        const double vc = std::clamp(v, 0.0, double(w - 1));
        const Eigen::Index i0 = Eigen::Index(std::floor(uc));
        const Eigen::Index j0 = Eigen::Index(std::floor(vc));
        const Eigen::Index i1 = std::min(i0 + 1, h - 1);
        const Eigen::Index j1 = std::min(j0 + 1, w - 1);
        const double fu = uc - double(i0), fv = vc - double(j0);
        if (fu == 0.0 && fv == 0.0) {
          dst(r, c) = src(i0, j0);
          continue;
        }
        const double top = (1 - fv) * src(i0, j0) + fv * src(i0, j1);
        const double bottom = (1 - fv) * src(i1, j0) + fv * src(i1, j1);
        dst(r, c) = (1 - fu) * top + fu * bottom;
      }
    }
  }
  return full;
}

}  // namespace polarkit
