// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_TOOLS_COMMANDS_HPP
#define POLARKIT_TOOLS_COMMANDS_HPP

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "polarkit/config.hpp"

namespace polarkit::tools {

namespace fs = std::filesystem;

/// Exit statuses of the command-line tool.
enum Exit : int { ok = 0, usage = 2, data = 3, transport = 4, shortfall = 5 };

/// Raised by a command that completed but must report a verification or
/// composition shortfall.
struct Shortfall {
  nlohmann::json summary;
};

struct Globals {
  fs::path config_file;
  fs::path data_dir;
  PipelineConfig config;
};

/// Each registrar adds one subcommand whose callback stores the work to run.
using Action = std::function<nlohmann::json(Globals&)>;
void add_decode(CLI::App& app, Action& action);
void add_encode(CLI::App& app, Action& action);
void add_analyze_reflection(CLI::App& app, Action& action);
void add_analyze_glass(CLI::App& app, Action& action);
void add_diff_detections(CLI::App& app, Action& action);
void add_gen(CLI::App& app, Action& action);
void add_compose(CLI::App& app, Action& action);
void add_train_sim(CLI::App& app, Action& action);
void add_attn_report(CLI::App& app, Action& action);
void add_judge(CLI::App& app, Action& action);

}  // namespace polarkit::tools

#endif  // POLARKIT_TOOLS_COMMANDS_HPP
