// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "tailcast/cli/commands.hpp"
#include "tailcast/diagnostics.hpp"

namespace tailcast::cli {

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> overrides;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_checkpoint) {
  cmd->add_option("--config", flags.config, "JSON run config (defaults apply when omitted)");
  cmd->add_option("--seed", flags.seed, "Run a single seed, replacing the config's seed list");
  cmd->add_option("--out", flags.out, "Output root; runs land in <out>/<command>-<config hash>");
  cmd->add_option("--override", flags.overrides, "Set a config value: dotted.key=json_value")->take_all();
  if (needs_checkpoint)
    cmd->add_option("--checkpoint", flags.checkpoint, "Checkpoint manifest (model.json)")->required();
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"tailcast: long-tail aware time series forecasting"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic long-tailed series");
  auto* train = app.add_subcommand("train", "Train a model for every configured seed");
  auto* finetune = app.add_subcommand("finetune", "Fine-tune a checkpoint on extreme windows");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint in raw target units");
  auto* embed = app.add_subcommand("export-embeddings", "Write last-hidden-layer embeddings");
  add_common(synth, flags, false);
  add_common(train, flags, false);
  add_common(finetune, flags, true);
  add_common(evaluate, flags, true);
  add_common(embed, flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::config);
  }

  set_warning_sink([](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; });
  try {
    std::optional<std::filesystem::path> config_path;
    if (!flags.config.empty()) config_path = flags.config;
    std::optional<std::uint64_t> seed;
    for (auto* cmd : {synth, train, finetune, evaluate, embed})
      if (cmd->parsed() && cmd->count("--seed") > 0) seed = flags.seed;
    std::optional<std::filesystem::path> out;
    if (!flags.out.empty()) out = flags.out;
    const auto config = load_run_config(config_path, flags.overrides, seed, out);

    CommandResult result;
    if (synth->parsed())
      result = cmd_synth(config);
    else if (train->parsed())
      result = cmd_train(config);
    else if (finetune->parsed())
      result = cmd_finetune(config, flags.checkpoint);
    else if (evaluate->parsed())
      result = cmd_evaluate(config, flags.checkpoint);
    else
      result = cmd_export_embeddings(config, flags.checkpoint);
    std::cout << result.summary.dump(2) << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: io error: " << e.what() << '\n';
    return exit_code(ErrorKind::io);
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace tailcast::cli
