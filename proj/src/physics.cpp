// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace polarkit::physics {

double iou(const Box& a, const Box& b) {
  const double ix = std::min(a[0] + a[2], b[0] + b[2]) - std::max(a[0], b[0]);
  const double iy = std::min(a[1] + a[3], b[1] + b[3]) - std::max(a[1], b[1]);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a[2] * a[3] + b[2] * b[3] - inter;
  return uni > 0 ? inter / uni : 0.0;
}

void validate(const DetectionList& detections) {
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i];
    require(d.bbox[2] > 0 && d.bbox[3] > 0, ErrorKind::data,
            "detection " + std::to_string(i) + " ('" + d.label + "') has a non-positive extent");
    require(d.confidence >= 0 && d.confidence <= 1, ErrorKind::data,
            "detection " + std::to_string(i) + " ('" + d.label + "') confidence outside [0, 1]");
  }
}

PlaneD rgb_difference(const RgbImage& with_reflection, const RgbImage& without_reflection) {
  for (int k = 0; k < 3; ++k) {
    require(same_shape(with_reflection[0], with_reflection[k]) &&
                same_shape(with_reflection[0], without_reflection[k]),
            ErrorKind::structural, "RGB planes differ in dimensions");
  }
  return ((with_reflection[0] - without_reflection[0]).abs() +
          (with_reflection[1] - without_reflection[1]).abs() +
          (with_reflection[2] - without_reflection[2]).abs()) /
         3.0;
}

Mask reflection_prior_mask(const PolarimetricMap<double>& polar, const RgbImage& with_reflection,
                           const RgbImage& without_reflection, const ReflectionThresholds& thresholds) {
  const PlaneD diff = rgb_difference(with_reflection, without_reflection);
  require(same_shape(diff, polar.dolp), ErrorKind::structural,
          "RGB images and polarimetric map differ in dimensions");
  return (polar.dolp > thresholds.dolp) && (diff > thresholds.rgb);
}

namespace {

// Separable min (erode) or max (dilate) over a square window.
Mask box_filter(const Mask& in, int radius, bool erode) {
  const Eigen::Index H = in.rows(), W = in.cols();
  Mask horizontal(H, W), out(H, W);
  for (Eigen::Index r = 0; r < H; ++r) {
    for (Eigen::Index c = 0; c < W; ++c) {
      bool acc = erode;
      for (Eigen::Index k = std::max<Eigen::Index>(0, c - radius);
           k <= std::min<Eigen::Index>(W - 1, c + radius); ++k) {
        acc = erode ? (acc && in(r, k)) : (acc || in(r, k));
      }
      horizontal(r, c) = acc;
    }
  }
  for (Eigen::Index r = 0; r < H; ++r) {
    for (Eigen::Index c = 0; c < W; ++c) {
      bool acc = erode;
      for (Eigen::Index k = std::max<Eigen::Index>(0, r - radius);
           k <= std::min<Eigen::Index>(H - 1, r + radius); ++k) {
        acc = erode ? (acc && horizontal(k, c)) : (acc || horizontal(k, c));
      }
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace

Mask morphological_open(const Mask& mask, int radius) {
  require(radius >= 0, ErrorKind::usage, "opening radius must be non-negative");
  if (radius == 0) return mask;
  return box_filter(box_filter(mask, radius, true), radius, false);
}

ReflectionEvidence localize_reflection(const PolarimetricMap<double>& polar,
                                       const RgbImage& with_reflection,
                                       const RgbImage& without_reflection,
                                       const ReflectionThresholds& thresholds) {
  const PlaneD diff = rgb_difference(with_reflection, without_reflection);
  require(same_shape(diff, polar.dolp), ErrorKind::structural,
          "RGB images and polarimetric map differ in dimensions");
  ReflectionEvidence ev;
  ev.mask = morphological_open((polar.dolp > thresholds.dolp) && (diff > thresholds.rgb),
                               thresholds.opening_radius);
  ev.pixel_count = ev.mask.count();
  if (ev.mask.size() > 0) ev.coverage_fraction = double(ev.pixel_count) / double(ev.mask.size());
  if (ev.pixel_count > 0) {
    ev.mean_dolp_inside = ev.mask.select(polar.dolp, 0.0).sum() / double(ev.pixel_count);
    ev.mean_rgb_difference_inside = ev.mask.select(diff, 0.0).sum() / double(ev.pixel_count);
  }
  return ev;
}

const char* to_string(GridCell cell) noexcept {
  static constexpr const char* names[] = {
      "top-left",    "top-center", "top-right",     "middle-left",  "center",
      "middle-right", "bottom-left", "bottom-center", "bottom-right"};
  return names[static_cast<int>(cell)];
}

GridCell parse_grid_cell(std::string_view name) {
  for (int i = 0; i < 9; ++i) {
    if (name == to_string(static_cast<GridCell>(i))) return static_cast<GridCell>(i);
  }
  fail(ErrorKind::format, "unknown grid cell '" + std::string(name) + "'");
}

namespace {

int third(double v, double extent) {
  const double a = extent / 3.0, b = 2.0 * extent / 3.0;
  if (v < a) return 0;
  if (v > b) return 2;
  return 1;  // boundaries resolve toward the middle band
}

}  // namespace

GridCell grid_cell(double x, double y, double width, double height) {
  return static_cast<GridCell>(third(y, height) * 3 + third(x, width));
}

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorKind::degenerate, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * double(values.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

GlassInstanceStats glass_stats(const coco::InstanceMask& mask, const PolarimetricMap<double>& polar) {
  require(same_shape(mask.bits, polar.dolp), ErrorKind::structural,
          "instance mask and polarimetric map differ in dimensions");
  GlassInstanceStats s;
  s.annotation_id = mask.annotation_id;
  s.area = mask.area();
  require(s.area > 0, ErrorKind::degenerate,
          "instance " + std::to_string(mask.annotation_id) + " has an empty mask");

  std::vector<double> values;
  values.reserve(std::size_t(s.area));
  double sx = 0, sy = 0;
  Eigen::Index min_r = mask.bits.rows(), max_r = -1, min_c = mask.bits.cols(), max_c = -1;
  for (Eigen::Index r = 0; r < mask.bits.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.bits.cols(); ++c) {
      if (!mask.bits(r, c)) continue;
      values.push_back(polar.dolp(r, c));
      sx += double(c) + 0.5;
      sy += double(r) + 0.5;
      min_r = std::min(min_r, r);
      max_r = std::max(max_r, r);
      min_c = std::min(min_c, c);
      max_c = std::max(max_c, c);
    }
  }
  const double n = double(values.size());
  s.centroid_x = sx / n;
  s.centroid_y = sy / n;
  s.bbox = {double(min_c), double(min_r), double(max_c - min_c + 1), double(max_r - min_r + 1)};
  s.position = grid_cell(s.centroid_x, s.centroid_y, double(mask.bits.cols()), double(mask.bits.rows()));

  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  s.dolp_mean = mean;
  s.dolp_std = std::sqrt(ss / n);
  s.dolp_p10 = percentile(values, 10);
  s.dolp_p90 = percentile(std::move(values), 90);
  return s;
}

namespace {

// Maximum-weight assignment on a square matrix (Hungarian method, minimizing -weight).
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const int n = int(weight.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weight[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

SpuriousObjectSet diff_detections(const DetectionList& with_reflection,
                                  const DetectionList& without_reflection,
                                  const MatchOptions& options) {
  validate(with_reflection);
  validate(without_reflection);
  const std::size_t n = with_reflection.size(), m = without_reflection.size();

  std::vector<std::vector<double>> overlap(n, std::vector<double>(m, -1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (with_reflection[i].label != without_reflection[j].label) continue;
      const double v = iou(with_reflection[i].bbox, without_reflection[j].bbox);
      if (v >= options.iou_threshold) overlap[i][j] = v;
    }
  }

  std::vector<DetectionMatch> matches;
  if (options.strategy == MatchStrategy::greedy) {
    std::vector<DetectionMatch> candidates;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (overlap[i][j] >= 0) candidates.push_back({i, j, overlap[i][j]});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const DetectionMatch& a, const DetectionMatch& b) { return a.iou > b.iou; });
    std::vector<char> used_i(n, 0), used_j(m, 0);
    for (const auto& c : candidates) {
      if (used_i[c.with_index] || used_j[c.without_index]) continue;
      used_i[c.with_index] = used_j[c.without_index] = 1;
      matches.push_back(c);
    }
  } else if (n > 0 && m > 0) {
    // Weight K + IoU with K above any achievable IoU sum puts match count first.
    const std::size_t size = std::max(n, m);
    const double k = double(size) + 1.0;
    std::vector<std::vector<double>> weight(size, std::vector<double>(size, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (overlap[i][j] >= 0) weight[i][j] = k + overlap[i][j];
      }
    }
    const auto assignment = max_weight_assignment(weight);
    for (std::size_t i = 0; i < n; ++i) {
      const int j = assignment[i];
      if (j >= 0 && std::size_t(j) < m && overlap[i][std::size_t(j)] >= 0) {
        matches.push_back({i, std::size_t(j), overlap[i][std::size_t(j)]});
      }
    }
  }

  std::sort(matches.begin(), matches.end(),
            [](const DetectionMatch& a, const DetectionMatch& b) { return a.with_index < b.with_index; });
  SpuriousObjectSet out;
  std::vector<char> matched(n, 0);
  for (const auto& mt : matches) matched[mt.with_index] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (matched[i]) {
      out.persistent.push_back(with_reflection[i]);
    } else {
      out.spurious.push_back(with_reflection[i]);
      out.spurious_indices.push_back(i);
    }
  }
  out.matches = std::move(matches);
  return out;
}

}  // namespace polarkit::physics
