// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/serialize.hpp"

#include "polarkit/errors.hpp"

namespace polarkit::serialize {

using json = nlohmann::json;

json to_json(const physics::Detection& d) {
  return {{"label", d.label},
          {"bbox", {d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3]}},
          {"confidence", d.confidence}};
}

json to_json(const physics::DetectionList& list) {
  json out = json::array();
  for (const auto& d : list) out.push_back(to_json(d));
  return out;
}

json to_json(const physics::SpuriousObjectSet& set) {
  json matches = json::array();
  for (const auto& m : set.matches) {
    matches.push_back({{"with_index", m.with_index}, {"without_index", m.without_index}, {"iou", m.iou}});
  }
  return {{"spurious", to_json(set.spurious)},
          {"persistent", to_json(set.persistent)},
          {"spurious_indices", set.spurious_indices},
          {"matches", matches}};
}

json to_json(const physics::GlassInstanceStats& g) {
  return {{"annotation_id", g.annotation_id},
          {"area", g.area},
          {"bbox", {g.bbox[0], g.bbox[1], g.bbox[2], g.bbox[3]}},
          {"centroid", {g.centroid_x, g.centroid_y}},
          {"relative_position", physics::to_string(g.position)},
          {"dolp_mean", g.dolp_mean},
          {"dolp_std", g.dolp_std},
          {"dolp_p10", g.dolp_p10},
          {"dolp_p90", g.dolp_p90}};
}

json to_json(const physics::ReflectionEvidence& ev) {
  return {{"mean_dolp_inside", ev.mean_dolp_inside},
          {"mean_rgb_difference_inside", ev.mean_rgb_difference_inside},
          {"coverage_fraction", ev.coverage_fraction},
          {"pixel_count", ev.pixel_count}};
}

physics::Detection detection_from_json(const json& j) {
  try {
    physics::Detection d;
    d.label = j.at("label").get<std::string>();
    const auto& b = j.at("bbox");
    require(b.is_array() && b.size() == 4, ErrorKind::format, "detection bbox must have four numbers");
    for (int k = 0; k < 4; ++k) d.bbox[k] = b[k].get<double>();
    d.confidence = j.value("confidence", 1.0);
    return d;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed detection: ") + e.what());
  }
}

physics::DetectionList detections_from_json(const json& j) {
  // Accept either a bare list or {"detections": [...]}.
  const json& list = j.is_object() && j.contains("detections") ? j.at("detections") : j;
  require(list.is_array(), ErrorKind::format, "detections must be a list");
  physics::DetectionList out;
  for (const auto& d : list) out.push_back(detection_from_json(d));
  return out;
}

physics::SpuriousObjectSet spurious_from_json(const json& j) {
  try {
    physics::SpuriousObjectSet s;
    s.spurious = detections_from_json(j.at("spurious"));
    s.persistent = detections_from_json(j.at("persistent"));
    if (j.contains("spurious_indices")) s.spurious_indices = j["spurious_indices"].get<std::vector<std::size_t>>();
    if (j.contains("matches")) {
      for (const auto& m : j["matches"]) {
        s.matches.push_back({m.at("with_index").get<std::size_t>(), m.at("without_index").get<std::size_t>(),
                             m.at("iou").get<double>()});
      }
    }
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed spurious set: ") + e.what());
  }
}

physics::GlassInstanceStats glass_from_json(const json& j) {
  try {
    physics::GlassInstanceStats g;
    g.annotation_id = j.at("annotation_id").get<std::int64_t>();
    g.area = j.at("area").get<std::int64_t>();
    for (int k = 0; k < 4; ++k) g.bbox[k] = j.at("bbox").at(k).get<double>();
    if (j.contains("centroid")) {
      g.centroid_x = j["centroid"].at(0).get<double>();
      g.centroid_y = j["centroid"].at(1).get<double>();
    }
    g.position = physics::parse_grid_cell(j.at("relative_position").get<std::string>());
    g.dolp_mean = j.at("dolp_mean").get<double>();
    g.dolp_std = j.at("dolp_std").get<double>();
    g.dolp_p10 = j.at("dolp_p10").get<double>();
    g.dolp_p90 = j.at("dolp_p90").get<double>();
    return g;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed glass instance: ") + e.what());
  }
}

}  // namespace polarkit::serialize
