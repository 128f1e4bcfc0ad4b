// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/coco.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "polarkit/errors.hpp"

namespace polarkit::coco {

using json = nlohmann::json;

const ImageInfo& AnnotationSet::image(std::int64_t image_id) const {
  for (const auto& img : images) {
    if (img.id == image_id) return img;
  }
  fail(ErrorKind::integrity, "no image with id " + std::to_string(image_id));
}

namespace {

Rle parse_rle(const json& seg, std::int64_t annotation_id) {
  Rle rle;
  const auto& size = seg.at("size");
  require(size.is_array() && size.size() == 2, ErrorKind::format,
          "annotation " + std::to_string(annotation_id) + ": RLE size must be [height, width]");
  rle.height = size[0].get<int>();
  rle.width = size[1].get<int>();
  const auto& counts = seg.at("counts");
  if (counts.is_string()) {
    rle.counts = rle_counts_from_string(counts.get<std::string>());
  } else {
    for (const auto& c : counts) {
      require(c.is_number_integer() && c.get<std::int64_t>() >= 0, ErrorKind::format,
              "annotation " + std::to_string(annotation_id) + ": RLE run must be a non-negative integer");
      rle.counts.push_back(c.get<std::uint32_t>());
    }
  }
  return rle;
}

Annotation parse_annotation(const json& a) {
  Annotation ann;
  ann.id = a.at("id").get<std::int64_t>();
  ann.image_id = a.at("image_id").get<std::int64_t>();
  ann.category_id = a.value("category_id", std::int64_t{0});
  ann.iscrowd = a.value("iscrowd", 0) != 0;
  if (a.contains("bbox")) {
    const auto& b = a.at("bbox");
    require(b.is_array() && b.size() == 4, ErrorKind::format,
            "annotation " + std::to_string(ann.id) + ": bbox must have four numbers");
    for (int k = 0; k < 4; ++k) ann.bbox[k] = b[k].get<double>();
  }
  if (a.contains("segmentation")) {
    const auto& seg = a.at("segmentation");
    if (seg.is_object()) {
      ann.rle = parse_rle(seg, ann.id);
    } else if (seg.is_array()) {
      for (const auto& ring : seg) {
        PolygonRing pts;
        for (const auto& v : ring) pts.push_back(v.get<double>());
        ann.polygons.push_back(std::move(pts));
      }
    } else {
      fail(ErrorKind::format, "annotation " + std::to_string(ann.id) + ": unsupported segmentation");
    }
  }
  return ann;
}

}  // namespace

AnnotationSet parse_annotations(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, "annotation document is malformed at byte " + std::to_string(e.byte) +
                               ": " + e.what());
  }
  require(doc.is_object(), ErrorKind::parse, "annotation document must be an object");

  AnnotationSet set;
  try {
    for (const auto& img : doc.at("images")) {
      set.images.push_back({img.at("id").get<std::int64_t>(), img.at("width").get<int>(),
                            img.at("height").get<int>(), img.value("file_name", std::string{})});
    }
    for (const auto& a : doc.at("annotations")) set.annotations.push_back(parse_annotation(a));
    if (doc.contains("categories")) {
      for (const auto& c : doc.at("categories")) {
        set.categories.push_back({c.at("id").get<std::int64_t>(), c.value("name", std::string{})});
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("annotation document has an invalid field: ") + e.what());
  }

  std::map<std::int64_t, int> image_count;
  for (const auto& img : set.images) ++image_count[img.id];
  std::vector<std::string> problems;
  for (const auto& [id, n] : image_count) {
    if (n > 1) problems.push_back("image id " + std::to_string(id) + " appears " + std::to_string(n) + " times");
  }
  for (const auto& ann : set.annotations) {
    auto it = image_count.find(ann.image_id);
    if (it == image_count.end()) {
      problems.push_back("annotation " + std::to_string(ann.id) + " references missing image " +
                         std::to_string(ann.image_id));
      continue;
    }
    const auto& img = set.image(ann.image_id);
    const auto& b = ann.bbox;
    if (b[0] < 0 || b[1] < 0 || b[0] + b[2] > img.width || b[1] + b[3] > img.height) {
      std::ostringstream msg;
      msg << "annotation " << ann.id << ": bbox [" << b[0] << ", " << b[1] << ", " << b[2] << ", "
          << b[3] << "] exceeds image " << img.id << " bounds " << img.width << "x" << img.height;
      set.warnings.push_back(msg.str());
    }
  }
  if (!problems.empty()) {
    std::string what = "annotation integrity check failed:";
    for (const auto& p : problems) what += "\n  " + p;
    fail(ErrorKind::integrity, what);
  }
  return set;
}

std::vector<std::uint32_t> rle_counts_from_string(std::string_view text) {
  std::vector<std::uint32_t> counts;
  std::size_t p = 0;
  while (p < text.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      require(p < text.size(), ErrorKind::format, "truncated compressed RLE string");
      const int c = int(static_cast<unsigned char>(text[p])) - 48;
      require(c >= 0 && c < 64, ErrorKind::format, "invalid character in compressed RLE string");
      x |= std::int64_t(c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(~std::uint64_t{0} << (5 * k));
    }
    // Runs after the second are delta coded against the run two back.
    if (counts.size() > 2) x += std::int64_t(counts[counts.size() - 2]);
    require(x >= 0, ErrorKind::format, "compressed RLE decodes to a negative run");
    counts.push_back(std::uint32_t(x));
  }
  return counts;
}

std::string rle_counts_to_string(std::span<const std::uint32_t> counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::int64_t x = counts[i];
    if (i > 2) x -= std::int64_t(counts[i - 2]);
    bool more = true;
    while (more) {
      int c = int(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      out.push_back(char(c + 48));
    }
  }
  return out;
}

Mask decode_rle(std::span<const std::uint32_t> counts, int height, int width) {
  require(height >= 0 && width >= 0, ErrorKind::structural, "negative mask dimensions");
  const std::uint64_t total = std::uint64_t(height) * std::uint64_t(width);
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  require(sum == total, ErrorKind::format,
          "RLE runs sum to " + std::to_string(sum) + " but mask has " + std::to_string(total) + " pixels");

  // Column-major fill: build the transposed (width x height) row-major buffer.
  Plane<bool> column_major = Plane<bool>::Zero(width, height);
  bool* data = column_major.data();
  std::uint64_t pos = 0;
  bool value = false;
  for (auto c : counts) {
    if (value) std::fill(data + pos, data + pos + c, true);
    pos += c;
    value = !value;
  }
  return column_major.transpose();
}

std::vector<std::uint32_t> encode_rle(const Mask& mask) {
  const Plane<bool> column_major = mask.transpose();
  std::vector<std::uint32_t> counts;
  bool value = false;
  std::uint32_t run = 0;
  for (Eigen::Index i = 0; i < column_major.size(); ++i) {
    if (column_major.data()[i] != value) {
      counts.push_back(run);
      run = 0;
      value = !value;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

namespace {

void validate_ring(const PolygonRing& ring) {
  require(ring.size() % 2 == 0, ErrorKind::format, "polygon ring has an odd number of coordinates");
  require(ring.size() >= 6, ErrorKind::format, "polygon ring needs at least three vertices");
  for (double v : ring) require(std::isfinite(v), ErrorKind::format, "polygon vertex is not finite");
}

// Scanline fill of one ring into `mask`.
void fill_ring(const PolygonRing& ring, Mask& mask) {
  const int height = int(mask.rows()), width = int(mask.cols());
  const std::size_t n = ring.size() / 2;
  std::vector<double> crossings;
  for (int r = 0; r < height; ++r) {
    const double y = r + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const double xi = ring[2 * i], yi = ring[2 * i + 1];
      const double xj = ring[2 * j], yj = ring[2 * j + 1];
      if ((yi > y) == (yj > y)) continue;
      crossings.push_back((xj - xi) * (y - yi) / (yj - yi) + xi);
    }
    std::sort(crossings.begin(), crossings.end());
    // Inside spans are [x_{2k}, x_{2k+1}) in centre coordinates.
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const double lo = crossings[k], hi = crossings[k + 1];
      if (!(lo < hi)) continue;
      double start = std::ceil(lo - 0.5);
      while (start - 1 + 0.5 >= lo) start -= 1;
      while (start + 0.5 < lo) start += 1;
      for (double c = std::max(start, 0.0); c < width && c + 0.5 < hi; c += 1) {
        mask(r, int(c)) = true;
      }
    }
  }
}

}  // namespace

Mask rasterize_polygon(std::span<const PolygonRing> rings, int height, int width) {
  require(height >= 0 && width >= 0, ErrorKind::structural, "negative mask dimensions");
  require(!rings.empty(), ErrorKind::format, "annotation has no polygon rings");
  Mask mask = Mask::Zero(height, width);
  for (const auto& ring : rings) {
    validate_ring(ring);
    fill_ring(ring, mask);
  }
  return mask;
}

Mask rasterize_polygon(const PolygonRing& ring, int height, int width) {
  return rasterize_polygon(std::span<const PolygonRing>(&ring, 1), height, width);
}

InstanceMask annotation_mask(const AnnotationSet& set, const Annotation& annotation) {
  const ImageInfo& img = set.image(annotation.image_id);
  InstanceMask out;
  out.annotation_id = annotation.id;
  if (annotation.rle) {
    require(annotation.rle->height == img.height && annotation.rle->width == img.width,
            ErrorKind::structural,
            "annotation " + std::to_string(annotation.id) + ": RLE size differs from image size");
    out.bits = decode_rle(annotation.rle->counts, img.height, img.width);
  } else {
    out.bits = rasterize_polygon(annotation.polygons, img.height, img.width);
  }
  return out;
}

}  // namespace polarkit::coco
