// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "commands.hpp"
#include "polarkit/errors.hpp"

#ifndef POLARKIT_DATA_DIR
#define POLARKIT_DATA_DIR "data"
#endif

namespace {

using polarkit::ErrorKind;
using namespace polarkit::tools;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return Exit::usage;
    case ErrorKind::transport:
    case ErrorKind::generation: return Exit::transport;
    case ErrorKind::composition: return Exit::shortfall;
    default: return Exit::data;
  }
}

void summary(const std::string& command, nlohmann::json fields, const char* status) {
  nlohmann::json line = {{"command", command}, {"status", status}};
  line.update(fields);
  std::cout << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polarimetric imaging, dataset generation and evaluation toolkit"};
  app.require_subcommand(1);
  Globals globals;
  globals.data_dir = POLARKIT_DATA_DIR;
  app.add_option("--config", globals.config_file, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--data-dir", globals.data_dir, "Shipped data directory")->capture_default_str();

  Action action;
  add_decode(app, action);
  add_encode(app, action);
  add_analyze_reflection(app, action);
  add_analyze_glass(app, action);
  add_diff_detections(app, action);
  add_gen(app, action);
  add_compose(app, action);
  add_train_sim(app, action);
  add_attn_report(app, action);
  add_judge(app, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return Exit::usage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    globals.config = globals.config_file.empty()
                         ? polarkit::config_from_json(nlohmann::json::object(), globals.data_dir)
                         : polarkit::load_config(globals.config_file, globals.data_dir);
    summary(command, action(globals), "ok");
    return Exit::ok;
  } catch (const Shortfall& s) {
    summary(command, s.summary, "shortfall");
    return Exit::shortfall;
  } catch (const polarkit::Error& e) {
    std::cerr << "polarkit " << command << ": " << polarkit::to_string(e.kind()) << " error: " << e.what() << "\n";
    summary(command, {{"error", polarkit::to_string(e.kind())}}, "error");
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "polarkit " << command << ": " << e.what() << "\n";
    summary(command, {{"error", "internal"}}, "error");
    return Exit::data;
  }
}
