// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailcast/cli/run_config.hpp"
#include "tailcast/dataio.hpp"
#include "tailcast/nn.hpp"
#include "tailcast/train.hpp"

namespace tailcast::cli {

/// Data and model shape derived from a config.
struct Experiment {
  dataio::TimeSeriesFrame frame;
  dataio::PreparedData data;
  nn::MlpSpec model;
  std::vector<std::string> target_names;
  /// GPD threshold: the extreme percentile of raw training values of the
  /// first target.
  double evt_threshold = 0.0;
};

dataio::TimeSeriesFrame load_frame(const RunConfig& config);
Experiment prepare_experiment(const RunConfig& config);

/// The config's training section with the run seed and data-dependent
/// defaults filled in.
train::TrainConfig train_config_for(const RunConfig& config, const Experiment& experiment, std::uint64_t seed);

struct SeedRun {
  std::uint64_t seed = 0;
  nn::ParamSet params;
  train::TrainReport report;
};

/// Initialization plus fit for one seed.
SeedRun train_seed(const RunConfig& config, const Experiment& experiment, std::uint64_t seed);

const std::vector<dataio::WindowSample>& split_by_name(const dataio::SplitResult& split, const std::string& name);

struct CommandResult {
  std::filesystem::path run_dir;
  std::vector<std::filesystem::path> artifacts;
  nlohmann::json summary;
};

CommandResult cmd_synth(const RunConfig& config);
CommandResult cmd_train(const RunConfig& config);
CommandResult cmd_finetune(const RunConfig& config, const std::filesystem::path& checkpoint);
CommandResult cmd_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint);
CommandResult cmd_export_embeddings(const RunConfig& config, const std::filesystem::path& checkpoint);

/// Parses argv and dispatches; returns the process exit code. Diagnostics go
/// to stderr, the command summary to stdout.
int run_cli(int argc, char** argv);

}  // namespace tailcast::cli
