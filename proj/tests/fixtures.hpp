// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_TESTS_FIXTURES_HPP
#define POLARKIT_TESTS_FIXTURES_HPP

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "polarkit/datagen.hpp"

namespace polarkit::fixtures {

inline datagen::SceneRecord reflection_scene(const std::string& id, bool with_spurious = true) {
  datagen::SceneRecord r;
  r.scene_id = id;
  r.scenario = datagen::Scenario::reflection;
  r.frame_width = 640;
  r.frame_height = 480;
  r.detections = {{"red chair", {10, 20, 100, 150}, 0.92}, {"bottle", {300, 40, 40, 120}, 0.81}};
  if (with_spurious) {
    r.spurious_set.spurious = {{"bottle", {300, 40, 40, 120}, 0.81}};
    r.spurious_set.spurious_indices = {1};
  }
  r.spurious_set.persistent = {{"red chair", {10, 20, 100, 150}, 0.92}};
  r.spurious_set.matches = {{0, 0, 0.88}};
  r.reflection_evidence = datagen::ReflectionSummary{0.52, 0.18, 0.07, 21504};
  r.provenance.source_dataset = "fixture";
  return r;
}

inline datagen::SceneRecord glass_scene(const std::string& id, int instances = 2) {
  datagen::SceneRecord r;
  r.scene_id = id;
  r.scenario = datagen::Scenario::transparent;
  r.frame_width = 640;
  r.frame_height = 480;
  for (int k = 0; k < instances; ++k) {
    physics::GlassInstanceStats g;
    g.annotation_id = k + 1;
    g.area = 4000 + 100 * k;
    g.bbox = {40.0 + 200 * k, 60, 80, 90};
    g.centroid_x = 80.0 + 200 * k;
    g.centroid_y = 105;
    g.position = physics::grid_cell(g.centroid_x, g.centroid_y, 640, 480);
    g.dolp_mean = 0.31 + 0.05 * k;
    g.dolp_std = 0.08;
    g.dolp_p10 = 0.2;
    g.dolp_p90 = 0.45;
    r.glass_instances.push_back(g);
  }
  r.provenance.source_dataset = "fixture";
  return r;
}

struct VerifyCase {
  std::string name;
  std::string template_id;
  datagen::VerificationContext context;
  std::string response;
  std::set<std::string> expected;  // empty: must be accepted
};

inline std::string turns(const std::vector<std::pair<std::string, std::string>>& qa) {
  nlohmann::json t = nlohmann::json::array();
  for (const auto& [q, a] : qa) t.push_back({{"question", q}, {"answer", a}});
  return nlohmann::json{{"turns", t}}.dump();
}

/// 50 responses that must be rejected, each with its exact reason codes.
inline std::vector<VerifyCase> adversarial_cases() {
  std::vector<VerifyCase> out;
  const char* captions[] = {"refl_caption_geometry", "refl_caption_spatial", "refl_caption_signal",
                            "glass_caption_geometry", "glass_caption_spatial", "glass_caption_signal"};
  auto caption = [&](int k) { return std::string(captions[k % 6]); };
  auto ctx = [](const std::string& id) {
    datagen::VerificationContext c;
    c.template_id = id;
    return c;
  };

  const char* colors[] = {"red", "blue", "green", "white", "black", "golden", "grey", "purple", "tinted"};
  for (int k = 0; k < 9; ++k) {
    out.push_back({std::string("color_") + colors[k], caption(k), ctx(caption(k)),
                   std::string("A strongly polarized planar region sits beside a ") + colors[k] +
                       " object near the lower left corner of the frame.",
                   {"lexical_color"}});
  }
  const char* textures[] = {"wooden", "metallic", "glossy", "fabric", "marble", "striped"};
  for (int k = 0; k < 6; ++k) {
    out.push_back({std::string("texture_") + textures[k], caption(k + 1), ctx(caption(k + 1)),
                   std::string("The polarized patch covers a ") + textures[k] +
                       " surface that occupies the upper center of the scene.",
                   {"lexical_texture"}});
  }
  const char* text_terms[] = {"The sign says exit above the polarized window region near the top edge.",
                              "A logo appears inside the high polarization area at the center right.",
                              "The label says fragile on the box next to the reflective pane.",
                              "Handwriting covers the region where the degree of polarization peaks sharply.",
                              "An inscription lies under the strongly polarized glass near the bottom.",
                              "The poster reads welcome, and the polarized area is on its left side."};
  for (int k = 0; k < 6; ++k) {
    out.push_back({"text_" + std::to_string(k), caption(k + 2), ctx(caption(k + 2)), text_terms[k],
                   {"lexical_readable_text"}});
  }
  out.push_back({"two_categories", "glass_caption_signal", ctx("glass_caption_signal"),
                 "A shiny blue bottle stands in the middle where polarization is strong.",
                 {"lexical_color", "lexical_texture"}});

  auto counting = [&](int count) {
    auto c = ctx("glass_instr_counting");
    c.instance_count = count;
    return c;
  };
  const std::pair<int, const char*> wrong[] = {{2, "There are 3 glass objects."},
                                               {3, "I count two glass panes in the scene."},
                                               {1, "Four transparent objects are visible."},
                                               {4, "There are 5 glass items here."},
                                               {2, "Exactly one glass instance is present."},
                                               {6, "Seven pieces of glass appear in the image."},
                                               {3, "The scene holds 10 glass objects."}};
  for (int k = 0; k < 7; ++k) {
    out.push_back({"count_wrong_" + std::to_string(k), "glass_instr_counting", counting(wrong[k].first),
                   turns({{"How many glass objects are there?", wrong[k].second}}), {"numeric_count_mismatch"}});
  }
  const char* no_number[] = {"Several glass objects are visible.", "There are a few panes of glass.",
                             "Some transparent objects are present."};
  for (int k = 0; k < 3; ++k) {
    out.push_back({"count_missing_" + std::to_string(k), "glass_instr_counting", counting(2),
                   turns({{"How many glass objects are there?", no_number[k]}}), {"numeric_count_missing"}});
  }

  out.push_back({"turn_empty_answer", "glass_instr_detection", ctx("glass_instr_detection"),
                 turns({{"Is there glass in the scene?", ""}}), {"structural_missing_turn"}});
  out.push_back({"turn_empty_question", "glass_instr_localization", ctx("glass_instr_localization"),
                 turns({{"", "The glass sits in the top left cell."}}), {"structural_missing_turn"}});
  out.push_back({"turn_second_blank", "refl_instr_scene", ctx("refl_instr_scene"),
                 turns({{"What is in the scene?", "A room with a window and a chair."}, {"Anything else?", "  "}}),
                 {"structural_missing_turn"}});
  out.push_back({"turns_empty_list", "glass_instr_description", ctx("glass_instr_description"), R"({"turns": []})",
                 {"structural_missing_turn"}});
  out.push_back({"turns_not_json", "refl_instr_recognition", ctx("refl_instr_recognition"),
                 "Question: is there a reflection? Answer: yes.", {"structural_format"}});
  out.push_back({"turns_wrong_shape", "glass_instr_detection", ctx("glass_instr_detection"),
                 R"({"question": "Is there glass?", "answer": "Yes."})", {"structural_format"}});

  auto counterfactual = [&](const std::string& object) {
    auto c = ctx("refl_instr_counterfactual");
    c.referenced_object = object;
    return c;
  };
  const std::pair<const char*, const char*> asserted[] = {
      {"bottle", "Yes, the bottle is on the table by the window."},
      {"bottle", "The bottle stands on the shelf to the right."},
      {"lamp", "Yes. The lamp is switched on in the corner."},
      {"person", "The person is standing behind the sofa."},
      {"plant", "It is a tall plant placed next to the door."},
      {"car", "Yes, a car is parked right outside, clearly present."},
      {"cat", "The cat sleeps on the windowsill."},
      {"clock", "The clock hangs on the wall above the desk."}};
  for (int k = 0; k < 8; ++k) {
    out.push_back({std::string("cf_asserted_") + asserted[k].first + std::to_string(k), "refl_instr_counterfactual",
                   counterfactual(asserted[k].first),
                   turns({{std::string("Where is the ") + asserted[k].first + "?", asserted[k].second}}),
                   {"counterfactual_presence_asserted"}});
  }
  out.push_back({"cf_target_missing", "refl_instr_counterfactual", counterfactual("bottle"),
                 turns({{"What is on the table?", "Nothing is physically there; it is only a reflection."}}),
                 {"counterfactual_target_missing"}});

  out.push_back({"caption_empty", "refl_caption_geometry", ctx("refl_caption_geometry"), "   ", {"structural_empty"}});
  out.push_back({"caption_short", "glass_caption_spatial", ctx("glass_caption_spatial"), "Glass on the left.",
                 {"structural_length"}});
  std::string rambling;
  for (int k = 0; k < 130; ++k) rambling += "polarized ";
  out.push_back({"caption_long", "glass_caption_geometry", ctx("glass_caption_geometry"), rambling,
                 {"structural_length"}});
  return out;
}

/// 50 responses that must be accepted.
inline std::vector<VerifyCase> clean_cases() {
  std::vector<VerifyCase> out;
  auto ctx = [](const std::string& id) {
    datagen::VerificationContext c;
    c.template_id = id;
    return c;
  };
  const char* captions[] = {
      "A strongly polarized planar region covers the upper left part of the frame.",
      "The polarized area lies to the right of a chair and above a small table.",
      "Polarization is high where the window reflects the room, but the intensity change is modest.",
      "Two glass objects stand in the middle band, each with moderate polarization.",
      "A glass pane is positioned left of center, close to the lower edge of the scene.",
      "The transparent object shows polarization well above its surroundings despite low contrast.",
      "A reflection occupies about seven percent of the frame near its center.",
      "Glass appears in the top right cell with a mean polarization of about one third.",
      "The reflective surface is vertical and spans most of the left half of the image.",
      "Polarization reveals a transparent cup that intensity alone barely separates from the wall.",
      "A thin sheet of glass divides the scene into a near and a far region.",
      "The polarized region is brighter in polarization than the rest of the frame.",
      "An object behind the pane is seen only through the reflection on its surface.",
      "Three transparent vessels line up along the bottom center of the frame.",
      "The pane sits between the camera and a chair, tilted slightly toward the floor."};
  const char* caption_ids[] = {"refl_caption_geometry", "refl_caption_spatial", "refl_caption_signal",
                               "glass_caption_geometry", "glass_caption_spatial", "glass_caption_signal"};
  for (int k = 0; k < 15; ++k) {
    out.push_back({"caption_" + std::to_string(k), caption_ids[k % 6], ctx(caption_ids[k % 6]), captions[k], {}});
  }

  const std::pair<int, const char*> counts[] = {
      {2, "There are 2 glass objects."},          {3, "I count three glass panes in the scene."},
      {1, "One glass instance is present."},       {4, "Four transparent objects are visible."},
      {5, "There are five pieces of glass."},      {6, "The scene holds 6 glass objects."},
      {10, "Ten glass items appear."},             {12, "There are twelve glass objects here."},
      {21, "I can see twenty-one glass objects."}, {0, "There are 0 glass objects in this view."}};
  for (int k = 0; k < 10; ++k) {
    auto c = ctx("glass_instr_counting");
    c.instance_count = counts[k].first;
    out.push_back({"count_" + std::to_string(k), "glass_instr_counting", c,
                   turns({{"How many glass objects are there?", counts[k].second}}), {}});
  }

  const std::pair<const char*, const char*> denials[] = {
      {"bottle", "No, the bottle is not physically there; it is a reflection in the window."},
      {"lamp", "There is no lamp in the room. What you see is a virtual image on the glass."},
      {"person", "The person isn't present; they are reflected from behind the camera."},
      {"plant", "That plant does not exist in the scene. It is only reflected."},
      {"car", "No car is in the room; the shape is a reflection of the street."},
      {"cat", "The cat is absent from the scene, and only its reflection shows."},
      {"clock", "You cannot reach the clock, because it is nonexistent outside the reflection."},
      {"chair", "No. The chair is illusory, produced by the reflective pane."},
      {"television", "The television never appears in the room itself, only as a reflected image."},
      {"dog", "Nothing is there; the dog is a virtual image in the glass."}};
  for (int k = 0; k < 10; ++k) {
    auto c = ctx("refl_instr_counterfactual");
    c.referenced_object = denials[k].first;
    out.push_back({std::string("cf_") + denials[k].first, "refl_instr_counterfactual", c,
                   turns({{std::string("Can you describe the ") + denials[k].first + "?", denials[k].second}}), {}});
  }

  const std::pair<const char*, std::pair<const char*, const char*>> others[] = {
      {"glass_instr_detection", {"Is there glass in the scene?", "Yes, there is glass in the scene."}},
      {"glass_instr_detection", {"Does the image contain a transparent object?", "Yes, two glass objects."}},
      {"glass_instr_detection", {"Any glass here?", "No glass is present."}},
      {"glass_instr_localization", {"Where is the glass?", "The glass is in the top left cell."}},
      {"glass_instr_localization", {"Where are the glass objects?", "One is at the center and one at the bottom right."}},
      {"glass_instr_localization", {"Locate the pane.", "It sits in the middle left cell."}},
      {"glass_instr_description", {"Describe the glass.", "A tall pane with moderate polarization across its area."}},
      {"glass_instr_description", {"What does the glass look like?", "Two small vessels with high polarization."}},
      {"refl_instr_scene", {"What is in the scene?", "A room with a chair and a window reflecting a bottle."}},
      {"refl_instr_scene", {"Describe the scene.", "An office with a desk near a large window."},},
      {"refl_instr_scene", {"What can you see?", "A red chair next to a glass door."}},
      {"refl_instr_recognition", {"Is there a reflection?", "Yes, the window reflects a bottle."}},
      {"refl_instr_recognition", {"Which objects are reflections?", "The bottle is a reflection in the glass."}},
      {"refl_instr_recognition", {"Does the image contain reflections?", "Yes, the upper left region is a reflection."}},
      {"refl_instr_recognition", {"Where is the reflection?", "On the window, left of the chair."}}};
  for (int k = 0; k < 15; ++k) {
    out.push_back({"other_" + std::to_string(k), others[k].first, ctx(others[k].first),
                   turns({{others[k].second.first, others[k].second.second}}), {}});
  }
  return out;
}

/// Appends `scenes` scenes holding one item per category.
inline void add_scenes(std::vector<datagen::ComposeItem>& out, const std::string& prefix, datagen::Scenario scenario,
                       int scenes, const std::vector<std::string>& categories) {
  for (int s = 0; s < scenes; ++s) {
    const std::string id = prefix + std::to_string(s);
    for (const auto& c : categories) out.push_back({id, scenario, c});
  }
}

/// Caption manifest sized like the published dataset: 18.9K reflection and
/// 9.6K transparent captions. Some scenes lost captions to verification.
inline std::vector<datagen::ComposeItem> caption_manifest() {
  using datagen::Scenario;
  const std::vector<std::string> all{"geometry", "spatial_relationship", "physical_signal_discrepancy"};
  std::vector<datagen::ComposeItem> out;
  add_scenes(out, "refl3_", Scenario::reflection, 6000, all);
  add_scenes(out, "refl2_", Scenario::reflection, 300, {all[0], all[2]});
  add_scenes(out, "refl1_", Scenario::reflection, 300, {all[1]});
  add_scenes(out, "glass3_", Scenario::transparent, 3000, all);
  add_scenes(out, "glass2_", Scenario::transparent, 200, {all[0], all[1]});
  add_scenes(out, "glass1_", Scenario::transparent, 200, {all[2]});
  return out;
}

/// Instruction manifest with 46.8K pairs over both scenarios.
inline std::vector<datagen::ComposeItem> instruction_manifest() {
  using datagen::Scenario;
  std::vector<datagen::ComposeItem> out;
  add_scenes(out, "refl3_", Scenario::reflection, 5000,
             {"scene_description", "reflection_recognition", "counterfactual_reasoning"});
  add_scenes(out, "refl2_", Scenario::reflection, 1000, {"scene_description", "reflection_recognition"});
  add_scenes(out, "refl1_", Scenario::reflection, 900, {"reflection_recognition"});
  add_scenes(out, "glass4_", Scenario::transparent, 6000,
             {"glass_detection", "glass_counting", "glass_localization", "glass_description"});
  add_scenes(out, "glass3_", Scenario::transparent, 1000, {"glass_counting", "glass_localization", "glass_description"});
  add_scenes(out, "glass1_", Scenario::transparent, 1900, {"glass_counting"});
  return out;
}

}  // namespace polarkit::fixtures

#endif  // POLARKIT_TESTS_FIXTURES_HPP
