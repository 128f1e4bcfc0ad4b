// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "polarkit/physics.hpp"
#include "polarkit/serialize.hpp"
#include "support.hpp"

using namespace polarkit;
using namespace polarkit::physics;
using polarkit::testing::throws_kind;

namespace {

PolarimetricMap<double> dolp_map(const PlaneD& dolp) {
  PolarimetricMap<double> p;
  p.dolp = dolp;
  p.aolp = PlaneD::Zero(dolp.rows(), dolp.cols());
  return p;
}

RgbImage flat_rgb(int h, int w, double v) { return {PlaneD::Constant(h, w, v), PlaneD::Constant(h, w, v), PlaneD::Constant(h, w, v)}; }

}  // namespace

TEST_CASE("box IoU") {
  CHECK(iou({0, 0, 2, 2}, {1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0));
  CHECK(iou({0, 0, 2, 2}, {2, 0, 2, 2}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0, 10);
  for (int i = 0; i < 100; ++i) {
    const Box a{u(rng), u(rng), 0.1 + u(rng), 0.1 + u(rng)}, b{u(rng), u(rng), 0.1 + u(rng), 0.1 + u(rng)};
    CHECK(iou(a, b) == doctest::Approx(oracle::iou(a, b)).epsilon(1e-12));
    CHECK(iou(a, b) == doctest::Approx(iou(b, a)).epsilon(1e-15));
  }
}

TEST_CASE("detection validation") {
  CHECK_NOTHROW(validate({{"cup", {0, 0, 1, 1}, 0.9}}));
  CHECK(throws_kind([] { validate({{"cup", {0, 0, 0, 1}, 0.9}}); }, ErrorKind::data));
  CHECK(throws_kind([] { validate({{"cup", {0, 0, 1, 1}, 1.5}}); }, ErrorKind::data));
}

TEST_CASE("reflection prior needs both cues") {
  PlaneD dolp(1, 4);
  dolp << 0.5, 0.5, 0.1, 0.1;
  RgbImage with = flat_rgb(1, 4, 0.2), without = flat_rgb(1, 4, 0.2);
  for (auto& ch : with) ch(0, 0) = ch(0, 2) = 0.6;
  const Mask m = reflection_prior_mask(dolp_map(dolp), with, without, {});
  CHECK(m(0, 0));
  CHECK(!m(0, 1));  // polarized but unchanged
  CHECK(!m(0, 2));  // changed but unpolarized
  CHECK(!m(0, 3));

  // Thresholds are strict.
  PlaneD edge = PlaneD::Constant(1, 1, 0.3);
  RgbImage a = flat_rgb(1, 1, 0.2), b = flat_rgb(1, 1, 0.1);
  CHECK(!reflection_prior_mask(dolp_map(edge), a, b, {})(0, 0));
  CHECK(rgb_difference(a, b)(0, 0) == doctest::Approx(0.1));
}

TEST_CASE("opening removes specks narrower than the square") {
  Mask m = Mask::Constant(12, 12, false);
  m.block(2, 2, 5, 5).setConstant(true);
  m(10, 10) = true;
  const Mask open = morphological_open(m, 2);
  CHECK(open.block(2, 2, 5, 5).all());
  CHECK(!open(10, 10));
  CHECK(open.count() == 25);
  CHECK((morphological_open(m, 0) == m).all());
  CHECK(throws_kind([&] { morphological_open(m, -1); }, ErrorKind::usage));
}

TEST_CASE("property: opening matches the brute-force oracle and is idempotent") {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    const int h = 3 + rng() % 15, w = 3 + rng() % 15, r = rng() % 3;
    Mask m(h, w);
    for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = rng() % 3 != 0;
    const Mask open = morphological_open(m, r);
    CHECK((open == oracle::opening(m, r)).all());
    CHECK((morphological_open(open, r) == open).all());
    CHECK((open && !m).count() == 0);  // anti-extensive
  }
}

TEST_CASE("localize_reflection summarizes the opened mask") {
  PlaneD dolp = PlaneD::Constant(10, 10, 0.1);
  dolp.block(0, 0, 6, 6).setConstant(0.8);
  RgbImage with = flat_rgb(10, 10, 0.5), without = flat_rgb(10, 10, 0.2);
  const auto ev = localize_reflection(dolp_map(dolp), with, without);
  CHECK(ev.pixel_count == 36);
  CHECK(ev.coverage_fraction == doctest::Approx(0.36));
  CHECK(ev.mean_dolp_inside == doctest::Approx(0.8));
  CHECK(ev.mean_rgb_difference_inside == doctest::Approx(0.3));

  const auto j = serialize::to_json(ev);
  CHECK(j.at("pixel_count") == 36);
  CHECK(throws_kind([&] { localize_reflection(dolp_map(PlaneD::Zero(3, 3)), with, without); }, ErrorKind::structural));
}

TEST_CASE("grid cells split the frame in thirds, ties toward the centre") {
  CHECK(grid_cell(1, 1, 9, 9) == GridCell::top_left);
  CHECK(grid_cell(8, 1, 9, 9) == GridCell::top_right);
  CHECK(grid_cell(4.5, 4.5, 9, 9) == GridCell::center);
  CHECK(grid_cell(3, 3, 9, 9) == GridCell::center);
  CHECK(grid_cell(6, 8, 9, 9) == GridCell::bottom_center);
  CHECK(parse_grid_cell(to_string(GridCell::middle_right)) == GridCell::middle_right);
  CHECK(throws_kind([] { parse_grid_cell("left"); }, ErrorKind::format));
}

TEST_CASE("percentiles interpolate between closest ranks") {
  CHECK(percentile({1, 2, 3, 4, 5}, 10) == doctest::Approx(1.4));
  CHECK(percentile({5, 1, 4, 2, 3}, 90) == doctest::Approx(4.6));
  CHECK(percentile({7}, 50) == 7);
  CHECK(throws_kind([] { percentile({}, 50); }, ErrorKind::degenerate));
}

TEST_CASE("glass statistics") {
  PlaneD dolp(3, 3);
  dolp << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9;
  coco::InstanceMask mask;
  mask.annotation_id = 4;
  mask.bits = Mask::Constant(3, 3, false);
  mask.bits(0, 1) = mask.bits(1, 1) = mask.bits(1, 2) = true;
  const auto s = glass_stats(mask, dolp_map(dolp));
  CHECK(s.area == 3);
  CHECK(s.bbox == Box{1, 0, 2, 2});
  CHECK(s.centroid_x == doctest::Approx((1.5 + 1.5 + 2.5) / 3));
  CHECK(s.centroid_y == doctest::Approx((0.5 + 1.5 + 1.5) / 3));
  CHECK(s.dolp_mean == doctest::Approx((0.2 + 0.5 + 0.6) / 3));
  const double m = s.dolp_mean;
  CHECK(s.dolp_std == doctest::Approx(std::sqrt(((0.2 - m) * (0.2 - m) + (0.5 - m) * (0.5 - m) + (0.6 - m) * (0.6 - m)) / 3)));
  CHECK(s.dolp_p10 == doctest::Approx(0.26));
  CHECK(s.dolp_p90 == doctest::Approx(0.58));

  const auto back = serialize::glass_from_json(serialize::to_json(s));
  CHECK(back.area == s.area);
  CHECK(back.position == s.position);
  CHECK(back.dolp_p90 == s.dolp_p90);

  mask.bits.setConstant(false);
  CHECK(throws_kind([&] { glass_stats(mask, dolp_map(dolp)); }, ErrorKind::degenerate));
}

TEST_CASE("detection difference: labels must agree and IoU reach the threshold") {
  const DetectionList with{{"cup", {0, 0, 10, 10}, 0.9}, {"plant", {20, 20, 5, 5}, 0.8}, {"cup", {40, 40, 4, 4}, 0.7}};
  const DetectionList without{{"cup", {1, 1, 10, 10}, 0.9}, {"vase", {20, 20, 5, 5}, 0.8}};
  const auto set = diff_detections(with, without);
  CHECK(set.persistent.size() == 1);
  CHECK(set.spurious.size() == 2);
  CHECK(set.spurious_indices == std::vector<std::size_t>{1, 2});
  CHECK(set.matches.at(0).with_index == 0);

  const auto back = serialize::spurious_from_json(serialize::to_json(set));
  CHECK(back.spurious_indices == set.spurious_indices);
  CHECK(back.spurious.at(0).label == "plant");
}

TEST_CASE("optimal matching beats greedy when the best pair blocks two matches") {
  // with[0] overlaps both without boxes; with[1] overlaps only without[0].
  const DetectionList with{{"cup", {0, 0, 10, 10}, 1}, {"cup", {-2, 0, 10, 10}, 1}};
  const DetectionList without{{"cup", {0.5, 0, 10, 10}, 1}, {"cup", {2, 0, 10, 10}, 1}};
  const auto greedy = diff_detections(with, without, {0.5, MatchStrategy::greedy});
  const auto optimal = diff_detections(with, without, {0.5, MatchStrategy::optimal});
  CHECK(greedy.spurious.size() == 1);
  CHECK(optimal.spurious.empty());
}

TEST_CASE("property: optimal matching agrees with exhaustive enumeration") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> pos(0, 20), ext(4, 10);
  const char* labels[] = {"cup", "bottle"};
  for (int trial = 0; trial < 150; ++trial) {
    DetectionList a, b;
    for (int i = 0, n = rng() % 6; i < n; ++i) a.push_back({labels[rng() % 2], {pos(rng), pos(rng), ext(rng), ext(rng)}, 1});
    for (int i = 0, n = rng() % 6; i < n; ++i) b.push_back({labels[rng() % 2], {pos(rng), pos(rng), ext(rng), ext(rng)}, 1});
    const auto got = diff_detections(a, b);
    const auto want = oracle::exhaustive_matching(a, b, 0.5);
    CHECK(int(got.matches.size()) == want.matches);
    double total = 0;
    for (const auto& m : got.matches) total += m.iou;
    CHECK(total == doctest::Approx(want.total_iou).epsilon(1e-9));
    CHECK(std::find(want.optimal_spurious.begin(), want.optimal_spurious.end(), got.spurious_indices) !=
          want.optimal_spurious.end());
  }
}
