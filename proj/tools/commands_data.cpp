// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <iostream>

#include "commands.hpp"
#include "polarkit/datagen.hpp"
#include "polarkit/errors.hpp"
#include "polarkit/io.hpp"
#include "polarkit/judge.hpp"

namespace polarkit::tools {

using json = nlohmann::json;

namespace {

std::unique_ptr<ChatClient> make_client(const std::string& kind, const Globals& g,
                                        std::unique_ptr<ChatClient> stub) {
  if (kind == "stub") return stub;
  require(kind == "live", ErrorKind::usage, "--client must be stub or live");
  return std::make_unique<HttpChatClient>(g.config.client.http);
}

/// Scene records come either as one JSONL file or as a directory of *.json files.
std::vector<datagen::SceneRecord> load_records(const fs::path& path) {
  std::vector<json> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) docs.push_back(io::read_json(f));
  } else {
    docs = io::read_jsonl(path);
  }
  std::vector<datagen::SceneRecord> records;
  records.reserve(docs.size());
  for (const auto& d : docs) {
    records.push_back(datagen::scene_record_from_json(d));
    records.back().validate();
  }
  require(!records.empty(), ErrorKind::usage, path.string() + ": no scene records");
  return records;
}

}  // namespace

void add_gen(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("gen", "Generate and verify captions and instruction dialogues");
  auto records_path = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  auto client_kind = std::make_shared<std::string>("stub");
  auto allow = std::make_shared<bool>(false);
  cmd->add_option("--records", *records_path, "Scene records: JSONL file or directory of JSON files")
      ->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->add_option("--client", *client_kind, "stub | live")->capture_default_str();
  cmd->add_flag("--allow-rejections", *allow, "Exit 0 even when some responses fail verification");
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const auto records = load_records(*records_path);
      const auto registry = datagen::TemplateRegistry::load_dir(g.config.paths.templates());
      const auto lexicon = datagen::Lexicon::load(g.config.paths.lexicon());
      auto client = make_client(*client_kind, g, std::make_unique<datagen::StubGenerationClient>());

      datagen::PipelineOptions options;
      options.client = {g.config.client.model, g.config.client.temperature, g.config.client.retry};
      options.max_in_flight = g.config.client.max_in_flight;
      AttemptLog log;
      const auto outcome = datagen::run_generation(records, registry, lexicon, *client, options, &log);

      std::vector<json> captions, instructions, rejected;
      for (const auto& s : outcome.captions) captions.push_back(datagen::to_json(s));
      for (const auto& s : outcome.instructions) instructions.push_back(datagen::to_json(s));
      std::map<std::string, std::int64_t> reasons;
      for (const auto& r : outcome.rejected) {
        json why = json::array();
        for (const auto& reason : r.verdict.reasons) {
          why.push_back({{"code", reason.code}, {"detail", reason.detail}});
          ++reasons[reason.code];
        }
        rejected.push_back({{"key", r.key}, {"response", r.response}, {"reasons", why}});
      }
      json failed = json::array();
      for (const auto& [key, err] : outcome.failed) failed.push_back({{"key", key}, {"error", err}});

      fs::create_directories(*out);
      io::write_jsonl(*out / "captions.jsonl", captions);
      io::write_jsonl(*out / "instructions.jsonl", instructions);
      io::write_jsonl(*out / "rejected.jsonl", rejected);
      json summary = {{"out", out->string()},
                      {"records", records.size()},
                      {"captions", captions.size()},
                      {"instructions", instructions.size()},
                      {"rejected", rejected.size()},
                      {"skipped", outcome.skipped.size()},
                      {"failed", failed.size()}};
      io::write_json(*out / "manifest.json", {{"counts", summary},
                                              {"rejection_reasons", reasons},
                                              {"skipped", outcome.skipped},
                                              {"failed", failed},
                                              {"attempts", log.size()},
                                              {"client", *client_kind},
                                              {"lexicon_version", lexicon.version()},
                                              {"config", to_json(g.config)}});
      if (!outcome.failed.empty()) {
        fail(ErrorKind::transport, std::to_string(outcome.failed.size()) + " generation job(s) failed; first: " +
                                       outcome.failed.front().first + ": " + outcome.failed.front().second);
      }
      if (!rejected.empty() && !*allow) throw Shortfall{summary};
      return summary;
    };
  });
}

void add_compose(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("compose", "Scene-disjoint train/val/test split assignment");
  auto in = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  cmd->add_option("--input", *in, "Directory written by gen")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const auto registry = datagen::TemplateRegistry::load_dir(g.config.paths.templates());
      const auto lexicon = datagen::Lexicon::load(g.config.paths.lexicon());
      const auto& st = g.config.splits;

      std::vector<datagen::CaptionSample> captions;
      for (const auto& j : io::read_jsonl(*in / "captions.jsonl")) captions.push_back(datagen::caption_from_json(j));
      std::vector<datagen::InstructionSample> instructions;
      for (const auto& j : io::read_jsonl(*in / "instructions.jsonl")) {
        instructions.push_back(datagen::instruction_from_json(j));
      }
      // Samples are re-checked so hand-edited inputs cannot slip into a split.
      for (const auto& s : captions) {
        require(datagen::reverify(s, registry, lexicon).accepted(), ErrorKind::integrity,
                "caption for scene " + s.scene_id + " no longer passes verification");
      }
      for (const auto& s : instructions) {
        require(datagen::reverify(s, registry, lexicon).accepted(), ErrorKind::integrity,
                "instruction for scene " + s.scene_id + " no longer passes verification");
      }

      std::vector<datagen::ComposeItem> cap_items, ins_items;
      for (const auto& s : captions) cap_items.push_back({s.scene_id, s.scenario, datagen::to_string(s.variant)});
      for (const auto& s : instructions) ins_items.push_back({s.scene_id, s.scenario, datagen::to_string(s.task)});

      datagen::Composition cap, ins;
      try {
        cap = datagen::compose_splits(
            cap_items, datagen::caption_targets(st.caption_train, st.caption_val, st.caption_scenarios, g.config.seed));
        ins = datagen::compose_splits(
            ins_items, datagen::instruction_targets(st.instruction_train, st.instruction_val, st.instruction_test, {},
                                                    g.config.seed));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::composition) throw;
        std::cerr << "polarkit compose: " << e.what() << "\n";
        throw Shortfall{{{"error", "composition"}, {"detail", e.what()}}};
      }

      std::vector<json> cap_out, ins_out;
      for (std::size_t i = 0; i < captions.size(); ++i) {
        if (cap.assignment[i] == datagen::Split::unassigned) continue;
        auto s = captions[i];
        s.split = cap.assignment[i];
        cap_out.push_back(datagen::to_json(s));
      }
      for (std::size_t i = 0; i < instructions.size(); ++i) {
        if (ins.assignment[i] == datagen::Split::unassigned) continue;
        auto s = instructions[i];
        s.split = ins.assignment[i];
        ins_out.push_back(datagen::to_json(s));
      }
      fs::create_directories(*out);
      io::write_jsonl(*out / "captions.jsonl", cap_out);
      io::write_jsonl(*out / "instructions.jsonl", ins_out);
      io::write_json(*out / "report.json", {{"captions", cap.report.to_json()},
                                            {"instructions", ins.report.to_json()},
                                            {"config", to_json(g.config)}});
      return json{{"out", out->string()},
                  {"captions", cap_out.size()},
                  {"instructions", ins_out.size()},
                  {"unassigned", cap.report.unassigned + ins.report.unassigned}};
    };
  });
}

void add_judge(CLI::App& app, Action& action) {
  auto* cmd = app.add_subcommand("judge", "Score predictions with a judge model and aggregate per task");
  auto predictions = std::make_shared<fs::path>();
  auto references = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  auto client_kind = std::make_shared<std::string>("stub");
  auto label = std::make_shared<std::string>("model");
  cmd->add_option("--predictions", *predictions, "JSONL of {id, prediction}")->required()->check(CLI::ExistingFile);
  cmd->add_option("--references", *references, "JSONL of {id, task, question, answer}")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->add_option("--client", *client_kind, "stub | live")->capture_default_str();
  cmd->add_option("--label", *label, "Row label in the results table")->capture_default_str();
  cmd->callback([=, &action] {
    action = [=](Globals& g) {
      const auto items = judge::join_items(io::read_jsonl(*references), io::read_jsonl(*predictions));
      const auto prompts = judge::PromptRegistry::load(g.config.paths.judge_prompts());
      auto client = make_client(*client_kind, g, std::make_unique<judge::StubJudgeClient>());
      judge::JudgeSettings settings;
      settings.model = g.config.client.model;
      settings.repeats = g.config.judge_repeats;
      settings.retry = g.config.client.retry;
      settings.max_in_flight = g.config.client.max_in_flight;
      const auto judged = judge::judge_all(items, *client, prompts, settings);

      std::vector<json> rows;
      for (const auto& s : judged) rows.push_back(s.to_json());
      fs::create_directories(*out);
      io::write_jsonl(*out / "judged.jsonl", rows);
      const auto table = judge::aggregate(judged);
      json results = table.to_json();
      results["label"] = *label;
      results["config"] = to_json(g.config);
      io::write_json(*out / "results.json", results);
      io::write_atomic(*out / "results.txt", table.format(*label));
      return json{{"out", out->string()},
                  {"samples", judged.size()},
                  {"flagged", table.flagged},
                  {"overall", table.overall}};
    };
  });
}

}  // namespace polarkit::tools
