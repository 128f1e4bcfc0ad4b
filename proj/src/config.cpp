// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/config.hpp"

#include <set>

#include "polarkit/errors.hpp"
#include "polarkit/io.hpp"

namespace polarkit {

using json = nlohmann::json;

void PipelineConfig::validate() const {
  const auto& t = thresholds;
  require(t.dolp >= 0 && t.dolp <= 1, ErrorKind::usage, "thresholds.dolp must lie in [0, 1]");
  require(t.rgb >= 0 && t.rgb <= 1, ErrorKind::usage, "thresholds.rgb must lie in [0, 1]");
  require(t.dark_fraction >= 0 && t.dark_fraction < 1, ErrorKind::usage, "thresholds.dark_fraction must lie in [0, 1)");
  require(t.phys_slack >= 0 && t.phys_slack <= 1, ErrorKind::usage, "thresholds.phys_slack must lie in [0, 1]");
  require(t.opening_radius >= 0 && t.opening_radius <= 64, ErrorKind::usage,
          "thresholds.opening_radius must lie in [0, 64]");
  require(t.iou > 0 && t.iou <= 1, ErrorKind::usage, "thresholds.iou must lie in (0, 1]");
  require(demosaic == "split" || demosaic == "nearest" || demosaic == "bilinear", ErrorKind::usage,
          "demosaic must be split, nearest or bilinear");
  require(client.temperature >= 0 && client.temperature <= 2, ErrorKind::usage, "client.temperature must lie in [0, 2]");
  require(client.retry.max_attempts >= 1, ErrorKind::usage, "client.max_attempts must be at least 1");
  require(client.max_in_flight >= 1, ErrorKind::usage, "client.max_in_flight must be at least 1");
  require(judge_repeats >= 1, ErrorKind::usage, "judge_repeats must be at least 1");
  for (auto n : {splits.caption_train, splits.caption_val, splits.instruction_train, splits.instruction_val,
                 splits.instruction_test}) {
    require(n >= 0, ErrorKind::usage, "split targets must be non-negative");
  }
}

physics::ReflectionThresholds PipelineConfig::reflection_thresholds() const {
  return {thresholds.dolp, thresholds.rgb, thresholds.opening_radius};
}

physics::MatchOptions PipelineConfig::match_options() const { return {thresholds.iou, match}; }

PolarimetricOptions<double> PipelineConfig::polarimetric_options() const {
  PolarimetricOptions<double> o;
  o.dark_fraction = thresholds.dark_fraction;
  o.phys_slack = thresholds.phys_slack;
  return o;
}

namespace {

void reject_unknown(const json& j, std::set<std::string> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    require(known.count(key) > 0, ErrorKind::usage, "unknown config key '" + where + key + "'");
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j, const std::filesystem::path& default_data_dir) {
  PipelineConfig c;
  c.paths.data_dir = default_data_dir;
  require(j.is_object(), ErrorKind::usage, "config must be a JSON object");
  reject_unknown(j, {"data_dir", "layout", "demosaic", "thresholds", "match", "encoding", "splits", "client",
                     "judge_repeats", "seed"},
                 "");
  try {
    if (j.contains("data_dir")) c.paths.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("layout")) c.layout = MosaicLayout::parse(j["layout"].get<std::string>());
    c.demosaic = j.value("demosaic", c.demosaic);
    if (j.contains("thresholds")) {
      const auto& t = j["thresholds"];
      reject_unknown(t, {"dolp", "rgb", "dark_fraction", "phys_slack", "opening_radius", "iou"}, "thresholds.");
      c.thresholds.dolp = t.value("dolp", c.thresholds.dolp);
      c.thresholds.rgb = t.value("rgb", c.thresholds.rgb);
      c.thresholds.dark_fraction = t.value("dark_fraction", c.thresholds.dark_fraction);
      c.thresholds.phys_slack = t.value("phys_slack", c.thresholds.phys_slack);
      c.thresholds.opening_radius = t.value("opening_radius", c.thresholds.opening_radius);
      c.thresholds.iou = t.value("iou", c.thresholds.iou);
    }
    if (j.contains("match")) {
      const std::string m = j["match"].get<std::string>();
      require(m == "optimal" || m == "greedy", ErrorKind::usage, "match must be optimal or greedy");
      c.match = m == "optimal" ? physics::MatchStrategy::optimal : physics::MatchStrategy::greedy;
    }
    if (j.contains("encoding")) c.encoding = parse_encoding_variant(j["encoding"].get<std::string>());
    if (j.contains("splits")) {
      const auto& s = j["splits"];
      reject_unknown(s, {"captions", "instructions"}, "splits.");
      if (s.contains("captions")) {
        const auto& cap = s["captions"];
        c.splits.caption_train = cap.value("train", c.splits.caption_train);
        c.splits.caption_val = cap.value("val", c.splits.caption_val);
        if (cap.contains("scenarios")) {
          for (const auto& [name, n] : cap["scenarios"].items()) {
            c.splits.caption_scenarios[datagen::parse_scenario(name)] = n.get<std::int64_t>();
          }
        }
      }
      if (s.contains("instructions")) {
        const auto& ins = s["instructions"];
        c.splits.instruction_train = ins.value("train", c.splits.instruction_train);
        c.splits.instruction_val = ins.value("val", c.splits.instruction_val);
        c.splits.instruction_test = ins.value("test", c.splits.instruction_test);
      }
    }
    if (j.contains("client")) {
      const auto& cl = j["client"];
      reject_unknown(cl, {"model", "temperature", "endpoint", "api_key_env", "timeout_s", "max_attempts",
                          "base_delay_ms", "backoff", "max_in_flight"},
                     "client.");
      c.client.model = cl.value("model", c.client.model);
      c.client.temperature = cl.value("temperature", c.client.temperature);
      c.client.http.endpoint = cl.value("endpoint", c.client.http.endpoint);
      c.client.http.api_key_env = cl.value("api_key_env", c.client.http.api_key_env);
      c.client.http.timeout = std::chrono::seconds(cl.value("timeout_s", std::int64_t(c.client.http.timeout.count())));
      c.client.retry.max_attempts = cl.value("max_attempts", c.client.retry.max_attempts);
      c.client.retry.base_delay =
          std::chrono::milliseconds(cl.value("base_delay_ms", std::int64_t(c.client.retry.base_delay.count())));
      c.client.retry.multiplier = cl.value("backoff", c.client.retry.multiplier);
      c.client.max_in_flight = cl.value("max_in_flight", c.client.max_in_flight);
    }
    c.judge_repeats = j.value("judge_repeats", c.judge_repeats);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    fail(ErrorKind::usage, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const PipelineConfig& c) {
  json scenarios = json::object();
  for (const auto& [s, n] : c.splits.caption_scenarios) scenarios[datagen::to_string(s)] = n;
  return {{"data_dir", c.paths.data_dir.string()},
          {"layout", c.layout.to_string()},
          {"demosaic", c.demosaic},
          {"thresholds",
           {{"dolp", c.thresholds.dolp},
            {"rgb", c.thresholds.rgb},
            {"dark_fraction", c.thresholds.dark_fraction},
            {"phys_slack", c.thresholds.phys_slack},
            {"opening_radius", c.thresholds.opening_radius},
            {"iou", c.thresholds.iou}}},
          {"match", c.match == physics::MatchStrategy::optimal ? "optimal" : "greedy"},
          {"encoding", to_string(c.encoding)},
          {"splits",
           {{"captions", {{"train", c.splits.caption_train}, {"val", c.splits.caption_val}, {"scenarios", scenarios}}},
            {"instructions",
             {{"train", c.splits.instruction_train},
              {"val", c.splits.instruction_val},
              {"test", c.splits.instruction_test}}}}},
          {"client",
           {{"model", c.client.model},
            {"temperature", c.client.temperature},
            {"endpoint", c.client.http.endpoint},
            {"api_key_env", c.client.http.api_key_env},
            {"timeout_s", c.client.http.timeout.count()},
            {"max_attempts", c.client.retry.max_attempts},
            {"base_delay_ms", c.client.retry.base_delay.count()},
            {"backoff", c.client.retry.multiplier},
            {"max_in_flight", c.client.max_in_flight}}},
          {"judge_repeats", c.judge_repeats},
          {"seed", c.seed}};
}

PipelineConfig load_config(const std::filesystem::path& file, const std::filesystem::path& default_data_dir) {
  return config_from_json(io::read_json(file), default_data_dir);
}

}  // namespace polarkit
