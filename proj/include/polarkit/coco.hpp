// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_COCO_HPP
#define POLARKIT_COCO_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polarkit/plane.hpp"

namespace polarkit::coco {

struct ImageInfo {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
};

/// Uncompressed COCO run-length encoding: column-major runs alternating
/// background / foreground, starting with background.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;
};

/// One ring is a flat list x0, y0, x1, y1, ...
using PolygonRing = std::vector<double>;

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  std::array<double, 4> bbox{};  // x, y, w, h
  std::vector<PolygonRing> polygons;
  std::optional<Rle> rle;
  bool iscrowd = false;
};

struct AnnotationSet {
  std::vector<ImageInfo> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;
  std::vector<std::string> warnings;

  const ImageInfo& image(std::int64_t image_id) const;
};

struct InstanceMask {
  Mask bits;  // rows = height
  std::int64_t annotation_id = 0;

  int width() const { return int(bits.cols()); }
  int height() const { return int(bits.rows()); }
  std::int64_t area() const { return bits.count(); }
};

/// Parses a COCO annotation document. Unknown fields are ignored.
AnnotationSet parse_annotations(std::string_view document);

/// Expands the compressed LEB128-like string form used by the COCO tools.
std::vector<std::uint32_t> rle_counts_from_string(std::string_view text);
std::string rle_counts_to_string(std::span<const std::uint32_t> counts);

Mask decode_rle(std::span<const std::uint32_t> counts, int height, int width);
std::vector<std::uint32_t> encode_rle(const Mask& mask);

/// Even-odd fill sampled at pixel centres (c + 0.5, r + 0.5). Edges are
/// half-open: a centre on a left or top edge is inside, on a right or bottom
/// edge outside. Several rings are unioned.
Mask rasterize_polygon(std::span<const PolygonRing> rings, int height, int width);
Mask rasterize_polygon(const PolygonRing& ring, int height, int width);

/// Mask for an annotation, sized to its parent image.
InstanceMask annotation_mask(const AnnotationSet& set, const Annotation& annotation);

}  // namespace polarkit::coco

#endif  // POLARKIT_COCO_HPP
