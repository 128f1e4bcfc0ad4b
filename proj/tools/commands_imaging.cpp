// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "commands.hpp"
#include "polarkit/coco.hpp"
#include "polarkit/encoding.hpp"
#include "polarkit/errors.hpp"
#include "polarkit/io.hpp"
#include "polarkit/serialize.hpp"

namespace polarkit::tools {

using json = nlohmann::json;

namespace {

PolarimetricMap<double> polar_from(const io::FloatMap& maps) {
  PolarimetricMap<double> p;
  p.dolp = maps.channel("dolp");
  p.aolp = maps.channel("aolp");
  return p;
}

physics::RgbImage rgb_from(const io::FloatMap& map, const fs::path& path) {
  require(map.planes.size() == 3, ErrorKind::format, path.string() + ": rgb image needs exactly 3 channels");
  return {map.planes[0], map.planes[1], map.planes[2]};
}

}  // namespace

void add_decode(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("decode", "Raw mosaic to Stokes and DoLP/AoLP maps");
  auto in = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  auto layout = std::make_shared<std::string>();
  cmd->add_option("--input", *in, "Raw 16-bit mosaic (sidecar at <input>.json)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--layout", *layout, "Superpixel orientations in reading order, e.g. 0,45,90,135");
  cmd->add_option("--out", *out, "Output float map")->required();
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      io::RawMosaicFile raw = io::read_raw_mosaic(*in);
      if (!layout->empty()) raw.frame.layout = MosaicLayout::parse(*layout);
      const auto& cfg = g.config;
      const AngularIntensityStack<double> stack =
          cfg.demosaic == "split" ? split_mosaic(raw.frame)
                                  : interpolate_full_res(raw.frame, parse_interpolation(cfg.demosaic));
      const StokesMap<double> stokes = decode_stokes(stack);
      const PolarimetricMap<double> polar = compute_polarimetric(stokes, cfg.polarimetric_options());

      const AngularIntensityStack<double> synth = synthesize_stack(stokes);
      double round_trip = 0;
      const std::array<const PlaneD*, 4> a = {&stack.i0, &stack.i45, &stack.i90, &stack.i135};
      const std::array<const PlaneD*, 4> b = {&synth.i0, &synth.i45, &synth.i90, &synth.i135};
      for (int k = 0; k < 4; ++k) round_trip = std::max(round_trip, ((*a[k]) - (*b[k])).abs().maxCoeff());
      const auto consistency = consistency_residual(stack);
      const auto& d = polar.diagnostics;

      json diagnostics = {{"dark_threshold", d.dark_threshold},
                          {"degenerate_pixels", d.degenerate_pixels},
                          {"clamped_pixels", d.clamped_pixels},
                          {"excess_pixels", d.excess_pixels},
                          {"max_raw_dolp", d.max_raw_dolp},
                          {"unphysical_pixels", stokes.count_unphysical(cfg.thresholds.phys_slack)},
                          {"round_trip_residual", round_trip},
                          {"consistency_residual_max", consistency.max},
                          {"consistency_residual_mean", consistency.mean}};
      io::FloatMap maps;
      maps.names = {"s0", "s1", "s2", "dolp", "aolp"};
      maps.planes = {stokes.s0, stokes.s1, stokes.s2, polar.dolp, polar.aolp};
      maps.meta = {{"source", in->filename().string()},
                   {"layout", raw.frame.layout.to_string()},
                   {"transfer", raw.transfer},
                   {"diagnostics", diagnostics},
                   {"config", to_json(cfg)}};
      io::write_float_map(*out, maps);
      return json{{"out", out->string()},
                  {"height", stokes.height()},
                  {"width", stokes.width()},
                  {"degenerate_pixels", d.degenerate_pixels},
                  {"excess_pixels", d.excess_pixels},
                  {"round_trip_residual", round_trip}};
    };
  });
}

void add_encode(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("encode", "Polarimetric maps to a 3-channel network input");
  auto maps_path = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  auto variant = std::make_shared<std::string>();
  auto normalize = std::make_shared<std::string>("none");
  cmd->add_option("--maps", *maps_path, "Float map from decode")->required()->check(CLI::ExistingFile);
  cmd->add_option("--variant", *variant, "decoupled | s0_stokes | dolp_coupled | s0_dolp_aolp (default from config)");
  cmd->add_option("--normalize", *normalize, "none | affine | mean_only")->capture_default_str();
  cmd->add_option("--out", *out, "Output float map")->required();
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const io::FloatMap maps = io::read_float_map(*maps_path);
      const EncodingVariant v = variant->empty() ? g.config.encoding : parse_encoding_variant(*variant);
      StokesMap<double> stokes{maps.channel("s0"), maps.channel("s1"), maps.channel("s2")};
      EncodedInput<double> enc = encode(stokes, polar_from(maps), v);
      if (*normalize == "affine") {
        enc = channel_normalize(enc, TargetStats<double>{}, NormalizeMode::affine);
      } else if (*normalize == "mean_only") {
        enc = channel_normalize(enc, TargetStats<double>{}, NormalizeMode::mean_only);
      } else {
        require(*normalize == "none", ErrorKind::usage, "--normalize must be none, affine or mean_only");
      }
      const auto names = channel_names(v);
      io::FloatMap outmap;
      outmap.names.assign(names.begin(), names.end());
      outmap.planes.assign(enc.channels.begin(), enc.channels.end());
      const auto& st = enc.channel_stats;
      outmap.meta = {{"variant", to_string(v)},
                     {"normalize", *normalize},
                     {"channel_stats",
                      {{"mean", st.mean}, {"stddev", st.stddev}, {"scale", st.scale}, {"shift", st.shift}}},
                     {"source", maps_path->filename().string()},
                     {"config", to_json(g.config)}};
      io::write_float_map(*out, outmap);
      return json{{"out", out->string()}, {"variant", to_string(v)}, {"channels", outmap.names}};
    };
  });
}

void add_analyze_reflection(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("analyze-reflection", "Reflection localization prior from DoLP and an RGB pair");
  auto maps_path = std::make_shared<fs::path>();
  auto with = std::make_shared<fs::path>();
  auto without = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  auto overlay = std::make_shared<fs::path>();
  cmd->add_option("--maps", *maps_path, "Float map from decode")->required()->check(CLI::ExistingFile);
  cmd->add_option("--with", *with, "RGB float map with the reflection")->required()->check(CLI::ExistingFile);
  cmd->add_option("--without", *without, "RGB float map without the reflection")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "Evidence JSON")->required();
  cmd->add_option("--overlay", *overlay, "Optional float map with mask, prior, dolp and rgb difference");
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const auto polar = polar_from(io::read_float_map(*maps_path));
      const auto rgb_with = rgb_from(io::read_float_map(*with), *with);
      const auto rgb_without = rgb_from(io::read_float_map(*without), *without);
      const auto thresholds = g.config.reflection_thresholds();
      const auto ev = physics::localize_reflection(polar, rgb_with, rgb_without, thresholds);
      json doc = serialize::to_json(ev);
      doc["config"] = to_json(g.config);
      io::write_json(*out, doc);
      if (!overlay->empty()) {
        const Mask prior = physics::reflection_prior_mask(polar, rgb_with, rgb_without, thresholds);
        io::FloatMap ov;
        ov.names = {"mask", "prior", "dolp", "rgb_difference"};
        ov.planes = {ev.mask.cast<double>(), prior.cast<double>(), polar.dolp,
                     physics::rgb_difference(rgb_with, rgb_without)};
        ov.meta = {{"config", to_json(g.config)}};
        io::write_float_map(*overlay, ov);
      }
      return json{{"out", out->string()}, {"pixel_count", ev.pixel_count}, {"coverage", ev.coverage_fraction}};
    };
  });
}

void add_analyze_glass(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("analyze-glass", "Per-instance DoLP statistics for COCO glass annotations");
  auto coco_path = std::make_shared<fs::path>();
  auto maps_path = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  auto image_id = std::make_shared<std::int64_t>(-1);
  cmd->add_option("--coco", *coco_path, "COCO annotation file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--maps", *maps_path, "Float map from decode")->required()->check(CLI::ExistingFile);
  cmd->add_option("--image-id", *image_id, "Image the maps belong to (needed when the file holds several)");
  cmd->add_option("--out", *out, "Glass statistics JSON")->required();
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const coco::AnnotationSet set = coco::parse_annotations(io::read_file(*coco_path));
      std::int64_t id = *image_id;
      if (id < 0) {
        require(set.images.size() == 1, ErrorKind::usage, "--image-id is required when the file holds several images");
        id = set.images.front().id;
      }
      const coco::ImageInfo& image = set.image(id);
      const auto polar = polar_from(io::read_float_map(*maps_path));
      require(polar.dolp.rows() == image.height && polar.dolp.cols() == image.width, ErrorKind::structural,
              "maps are " + std::to_string(polar.dolp.cols()) + "x" + std::to_string(polar.dolp.rows()) +
                  " but image " + std::to_string(id) + " is " + std::to_string(image.width) + "x" +
                  std::to_string(image.height));
      json instances = json::array();
      for (const auto& ann : set.annotations) {
        if (ann.image_id != id) continue;
        instances.push_back(serialize::to_json(physics::glass_stats(coco::annotation_mask(set, ann), polar)));
      }
      io::write_json(*out, {{"image_id", id},
                            {"width", image.width},
                            {"height", image.height},
                            {"instances", instances},
                            {"warnings", set.warnings},
                            {"config", to_json(g.config)}});
      return json{{"out", out->string()}, {"image_id", id}, {"instances", instances.size()}};
    };
  });
}

void add_diff_detections(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("diff-detections", "Spurious objects: detections present only with the reflection");
  auto with = std::make_shared<fs::path>();
  auto without = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  cmd->add_option("--with", *with, "Detections on the image with the reflection")->required()->check(CLI::ExistingFile);
  cmd->add_option("--without", *without, "Detections on the reflection-free image")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "Spurious object set JSON")->required();
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const auto a = serialize::detections_from_json(io::read_json(*with));
      const auto b = serialize::detections_from_json(io::read_json(*without));
      physics::validate(a);
      physics::validate(b);
      const auto set = physics::diff_detections(a, b, g.config.match_options());
      json doc = serialize::to_json(set);
      doc["config"] = to_json(g.config);
      io::write_json(*out, doc);
      return json{{"out", out->string()}, {"spurious", set.spurious.size()}, {"persistent", set.persistent.size()}};
    };
  });
}

}  // namespace polarkit::tools
