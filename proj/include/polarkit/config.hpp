// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_CONFIG_HPP
#define POLARKIT_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "polarkit/chat_client.hpp"
#include "polarkit/datagen.hpp"
#include "polarkit/encoding.hpp"
#include "polarkit/mosaic.hpp"
#include "polarkit/physics.hpp"

namespace polarkit {

struct PipelineConfig {
  struct Paths {
    std::filesystem::path data_dir;  // shipped data: templates, lexicon, judge prompts, vocabulary
    std::filesystem::path templates() const { return data_dir / "templates"; }
    std::filesystem::path lexicon() const { return data_dir / "lexicon_v1.json"; }
    std::filesystem::path judge_prompts() const { return data_dir / "judge" / "prompts.json"; }
    std::filesystem::path vocabulary() const { return data_dir / "fusion" / "toy_vocab.json"; }
  } paths;

  MosaicLayout layout;
  std::string demosaic = "split";  // split | nearest | bilinear

  struct Thresholds {
    double dolp = 0.3;
    double rgb = 0.1;
    double dark_fraction = 1e-6;
    double phys_slack = 0.05;
    int opening_radius = 2;
    double iou = 0.5;
  } thresholds;
  physics::MatchStrategy match = physics::MatchStrategy::optimal;

  EncodingVariant encoding = EncodingVariant::decoupled;

  struct SplitTargets {
    std::int64_t caption_train = 25200;
    std::int64_t caption_val = 3300;
    std::map<datagen::Scenario, std::int64_t> caption_scenarios;  // empty: no balance constraint
    std::int64_t instruction_train = 41900;
    std::int64_t instruction_val = 3900;
    std::int64_t instruction_test = 1000;
  } splits;

  struct Client {
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    HttpClientConfig http;
    RetryPolicy retry;
    std::size_t max_in_flight = 4;
  } client;

  int judge_repeats = 3;
  std::uint64_t seed = 0;

  /// Throws usage on any value outside its documented range.
  void validate() const;
  physics::ReflectionThresholds reflection_thresholds() const;
  physics::MatchOptions match_options() const;
  PolarimetricOptions<double> polarimetric_options() const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& default_data_dir);
nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& file, const std::filesystem::path& default_data_dir);

}  // namespace polarkit

#endif  // POLARKIT_CONFIG_HPP
