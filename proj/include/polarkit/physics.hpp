// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_PHYSICS_HPP
#define POLARKIT_PHYSICS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "polarkit/coco.hpp"
#include "polarkit/stokes.hpp"

namespace polarkit::physics {

/// Axis-aligned box in pixels: x, y, width, height.
using Box = std::array<double, 4>;

double iou(const Box& a, const Box& b);

struct Detection {
  std::string label;
  Box bbox{};
  double confidence = 1.0;
};

using DetectionList = std::vector<Detection>;

/// Throws data on non-positive extents or confidence outside [0, 1].
void validate(const DetectionList& detections);

/// Linear RGB planes in [0, 1].
using RgbImage = std::array<PlaneD, 3>;

struct ReflectionThresholds {
  double dolp = 0.3;
  double rgb = 0.1;
  int opening_radius = 2;
};

struct ReflectionEvidence {
  Mask mask;
  double mean_dolp_inside = 0;
  double mean_rgb_difference_inside = 0;
  double coverage_fraction = 0;
  std::int64_t pixel_count = 0;
};

/// Mean absolute difference over the three channels, per pixel.
PlaneD rgb_difference(const RgbImage& with_reflection, const RgbImage& without_reflection);

/// (dolp > tau_dolp) AND (rgb difference > tau_rgb), before any morphology.
Mask reflection_prior_mask(const PolarimetricMap<double>& polar, const RgbImage& with_reflection,
                           const RgbImage& without_reflection, const ReflectionThresholds& thresholds);

/// Erosion then dilation with a (2r+1)x(2r+1) square; out-of-frame pixels are ignored.
Mask morphological_open(const Mask& mask, int radius);

ReflectionEvidence localize_reflection(const PolarimetricMap<double>& polar,
                                       const RgbImage& with_reflection,
                                       const RgbImage& without_reflection,
                                       const ReflectionThresholds& thresholds = {});

/// 3x3 placement of an instance centroid within the frame.
enum class GridCell {
  top_left, top_center, top_right,
  middle_left, center, middle_right,
  bottom_left, bottom_center, bottom_right,
};

const char* to_string(GridCell cell) noexcept;
GridCell parse_grid_cell(std::string_view name);

/// Cell containing (x, y) in pixel units; points on a cell boundary go to the
/// cell nearer the frame centre.
GridCell grid_cell(double x, double y, double width, double height);

struct GlassInstanceStats {
  std::int64_t annotation_id = 0;
  std::int64_t area = 0;
  Box bbox{};
  double centroid_x = 0;
  double centroid_y = 0;
  GridCell position = GridCell::center;
  double dolp_mean = 0;
  double dolp_std = 0;  // population
  double dolp_p10 = 0;  // linear interpolation between order statistics
  double dolp_p90 = 0;
};

GlassInstanceStats glass_stats(const coco::InstanceMask& mask, const PolarimetricMap<double>& polar);

/// Percentile with linear interpolation between closest ranks; q in [0, 100].
double percentile(std::vector<double> values, double q);

enum class MatchStrategy { optimal, greedy };

struct MatchOptions {
  double iou_threshold = 0.5;
  MatchStrategy strategy = MatchStrategy::optimal;
};

struct DetectionMatch {
  std::size_t with_index = 0;
  std::size_t without_index = 0;
  double iou = 0;
};

struct SpuriousObjectSet {
  DetectionList spurious;    // only in the image with reflections
  DetectionList persistent;  // matched in both
  std::vector<std::size_t> spurious_indices;
  std::vector<DetectionMatch> matches;
};

/// Same-label pairs with IoU >= threshold are matchable. The optimal strategy
/// maximizes the number of matches, then total IoU; greedy takes pairs by
/// descending IoU.
SpuriousObjectSet diff_detections(const DetectionList& with_reflection,
                                  const DetectionList& without_reflection,
                                  const MatchOptions& options = {});

}  // namespace polarkit::physics

#endif  // POLARKIT_PHYSICS_HPP
