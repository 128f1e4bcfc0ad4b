// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_SERIALIZE_HPP
#define POLARKIT_SERIALIZE_HPP

#include <json.hpp>

#include "polarkit/physics.hpp"

// JSON forms of the analysis types shared by scene records and CLI outputs.
namespace polarkit::serialize {

nlohmann::json to_json(const physics::Detection& d);
nlohmann::json to_json(const physics::DetectionList& list);
nlohmann::json to_json(const physics::SpuriousObjectSet& set);
nlohmann::json to_json(const physics::GlassInstanceStats& g);
nlohmann::json to_json(const physics::ReflectionEvidence& ev);  // summary, no mask

physics::Detection detection_from_json(const nlohmann::json& j);
physics::DetectionList detections_from_json(const nlohmann::json& j);
physics::SpuriousObjectSet spurious_from_json(const nlohmann::json& j);
physics::GlassInstanceStats glass_from_json(const nlohmann::json& j);

}  // namespace polarkit::serialize

#endif  // POLARKIT_SERIALIZE_HPP
