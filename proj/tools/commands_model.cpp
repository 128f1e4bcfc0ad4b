// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"
#include "polarkit/errors.hpp"
#include "polarkit/fusion/analysis.hpp"
#include "polarkit/fusion/data.hpp"
#include "polarkit/fusion/train.hpp"
#include "polarkit/io.hpp"

namespace polarkit::tools {

using json = nlohmann::json;
using namespace polarkit::fusion;

namespace {

Mat visual_tokens(const fs::path& file, const ModelConfig& cfg) {
  const io::FloatMap map = io::read_float_map(file);
  require(map.planes.size() >= 3, ErrorKind::format, file.string() + ": needs at least 3 channels");
  const Mat tokens = patchify({map.planes[0], map.planes[1], map.planes[2]}, cfg.patch_size);
  require(tokens.rows() == cfg.visual_tokens, ErrorKind::structural,
          file.string() + ": yields " + std::to_string(tokens.rows()) + " patch tokens, model expects " +
              std::to_string(cfg.visual_tokens));
  return tokens;
}

/// Rows of {polar, rgb, instruction, answer}; image paths are relative to the data file.
std::vector<TrainingBatch> load_batches(const fs::path& file, const ModelConfig& cfg, const Tokenizer& tok,
                                        Stage stage) {
  const fs::path base = file.parent_path();
  std::vector<TrainingBatch> batches;
  for (const auto& row : io::read_jsonl(file)) {
    try {
      TrainingBatch b;
      b.polar = visual_tokens(base / row.at("polar").get<std::string>(), cfg);
      if (stage == Stage::stage2) {
        require(row.contains("rgb"), ErrorKind::usage, "stage 2 rows need an rgb image");
        b.rgb = visual_tokens(base / row.at("rgb").get<std::string>(), cfg);
      }
      b.instruction = tok.encode(row.at("instruction").get<std::string>());
      b.instruction.insert(b.instruction.begin(), tok.bos());
      b.targets = tok.encode(row.at("answer").get<std::string>());
      b.targets.push_back(tok.eos());
      batches.push_back(std::move(b));
    } catch (const json::exception& e) {
      fail(ErrorKind::parse, file.string() + ": bad training row: " + e.what());
    }
  }
  require(!batches.empty(), ErrorKind::usage, file.string() + ": no training rows");
  return batches;
}

}  // namespace

void add_train_sim(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("train-sim", "Two-stage training of the toy dual-stream model");
  auto spec_path = std::make_shared<fs::path>();
  auto data_path = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  cmd->add_option("--spec", *spec_path, "Model and per-stage optimizer settings (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--data", *data_path, "Training rows (JSONL)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const json spec = spec_path->empty() ? json::object() : io::read_json(*spec_path);
      json model_json = spec.value("model", json::object());
      if (!model_json.contains("seed")) model_json["seed"] = g.config.seed;
      ModelConfig cfg = model_config_from_json(model_json);
      cfg.stage = Stage::stage1;
      const Tokenizer tok = Tokenizer::load(g.config.paths.vocabulary());
      require(tok.size() == cfg.vocab_size, ErrorKind::usage,
              "vocabulary has " + std::to_string(tok.size()) + " tokens but model.vocab_size is " +
                  std::to_string(cfg.vocab_size));

      DualStreamModel model(cfg);
      json log = json::object();
      fs::create_directories(*out);
      for (Stage stage : {Stage::stage1, Stage::stage2}) {
        const std::string name = to_string(stage);
        const json st = spec.value(name, json::object());
        const int steps = st.value("steps", 50);
        require(steps >= 0, ErrorKind::usage, name + ".steps must be non-negative");
        const OptimizerConfig opt = optimizer_config_from_json(st.value("optimizer", json::object()), stage, steps);
        model.set_stage(stage);
        const auto batches = load_batches(*data_path, cfg, tok, stage);
        const TrainLog run = train(model, batches, StageMask::for_stage(stage), opt, steps);
        log[name] = {{"steps", steps}, {"losses", run.losses}, {"optimizer", to_json(opt)}};
        save_checkpoint(*out / name, model, {{"optimizer", to_json(opt)}, {"config", to_json(g.config)}});
      }
      log["config"] = to_json(g.config);
      log["model"] = to_json(cfg);
      io::write_json(*out / "train_log.json", log);

      auto last = [&](const char* s) {
        const auto& l = log[s]["losses"];
        return l.empty() ? json(nullptr) : l.back();
      };
      return json{{"out", out->string()}, {"stage1_final_loss", last("stage1")}, {"stage2_final_loss", last("stage2")}};
    };
  });
}

void add_attn_report(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("attn-report", "Attention share on polarization tokens and stream scales");
  auto ckpt = std::make_shared<fs::path>();
  auto data_path = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  auto index = std::make_shared<std::size_t>(0);
  cmd->add_option("--checkpoint", *ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--data", *data_path, "Rows (JSONL) in the train-sim format")->required()->check(CLI::ExistingFile);
  cmd->add_option("--index", *index, "Row to analyse")->capture_default_str();
  cmd->add_option("--out", *out, "Report JSON")->required();
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const DualStreamModel model = load_checkpoint(*ckpt);
      const Tokenizer tok = Tokenizer::load(g.config.paths.vocabulary());
      const auto batches = load_batches(*data_path, model.config(), tok, model.stage());
      require(*index < batches.size(), ErrorKind::usage,
              "--index " + std::to_string(*index) + " is past the last row");
      const TrainingBatch& batch = batches[*index];

      const ForwardResult fwd = forward(model, batch);
      const auto ratios = polarization_attention_ratio(fwd.trace);
      const double row_error = max_row_sum_error(fwd.trace);
      const StreamScaleReport scales = stream_scale_report(model, batch);
      io::write_json(*out, {{"checkpoint", ckpt->string()},
                            {"stage", to_string(model.stage())},
                            {"row", *index},
                            {"polarization_attention_ratio", ratios},
                            {"max_row_sum_error", row_error},
                            {"stream_scales", scales.to_json()},
                            {"config", to_json(g.config)}});
      return json{{"out", out->string()}, {"ratios", ratios}, {"max_row_sum_error", row_error}};
    };
  });
}

}  // namespace polarkit::tools
