// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailcast/dataio.hpp"
#include "tailcast/eval.hpp"
#include "tailcast/finetune.hpp"
#include "tailcast/nn.hpp"
#include "tailcast/synth.hpp"
#include "tailcast/train.hpp"

namespace tailcast::cli {

struct FinetuneSection {
  finetune::FreezeSpec freeze;
  bool freeze_all = false;            // "frozen_prefix": "all"
  std::vector<std::size_t> sweep;     // empty: single run at freeze.frozen_prefix
};

struct EmbeddingSection {
  eval::EmbeddingSample sample;
  std::string split = "test";
};

/// One JSON document describing a run. Every field has a default, so "{}" is
/// a complete config (synthetic data, standard protocol).
struct RunConfig {
  std::optional<std::filesystem::path> csv;
  synth::SynthSpec synth;
  dataio::CsvSchema schema;
  std::size_t alpha = 72;
  std::size_t beta = 12;
  dataio::ExtremeRule extreme;
  dataio::SplitFractions splits;
  std::vector<std::size_t> hidden_widths = nn::MlpSpec{}.hidden_widths;
  double dropout_rate = 0.1;
  train::TrainConfig train;
  FinetuneSection finetune;
  std::string evaluate_split = "test";
  EmbeddingSection embeddings;
  std::filesystem::path out = "runs";
  std::vector<std::uint64_t> seeds = {0};

  /// Checks every module precondition that does not need the data.
  void validate() const;
  nlohmann::json to_json() const;
  /// to_json() without the output root; what a run's results depend on.
  nlohmann::json content_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  /// Hex digest of the canonical JSON form.
  std::string content_hash() const;
};

/// Sets a dotted path ("train.learning_rate=0.05"). The value is parsed as
/// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a config file (or "{}" when path is empty), applies overrides and
/// the --seed / --out flags, then parses and validates.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
                          const std::optional<std::filesystem::path>& out);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace tailcast::cli
