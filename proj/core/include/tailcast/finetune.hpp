// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailcast/dataio.hpp"
#include "tailcast/eval.hpp"
#include "tailcast/nn.hpp"
#include "tailcast/train.hpp"

namespace tailcast::finetune {

struct FreezeSpec {
  /// Dense layers frozen from the input side.
  std::size_t frozen_prefix = 0;
  /// L2 strength on the trainable layers.
  double l2 = 1e-6;
  std::size_t max_epochs = 500;
  /// Keep the base strategy's weighting on the extreme pool instead of
  /// uniform weights.
  bool inherit_weighting = false;

  nlohmann::json to_json() const;
  static FreezeSpec from_json(const nlohmann::json& j);
  static FreezeSpec from_json(const nlohmann::json& j, FreezeSpec defaults);
};

/// First k dense layers non-trainable, the rest trainable.
nn::TrainableMask freeze(const nn::ParamSet& params, std::size_t k);

/// Continues training on the extreme training windows only, with the freeze
/// mask and early stopping on the extreme evaluation set. The starting
/// parameters compete as epoch 0, so the result never scores worse there.
train::FitResult finetune_run(const nn::ParamSet& params, const dataio::SplitResult& split,
                              const FreezeSpec& spec, const train::TrainConfig& base);

struct SweepRow {
  std::size_t frozen_prefix = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double eval_loss = 0.0;
  std::size_t best_epoch = 0;
  bool selected = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t selected_index = 0;
  nn::ParamSet selected_params;
};

inline const std::vector<std::size_t> kDefaultFreezeSweep = {0, 2, 4, 6, 8};

/// One fine-tuning run per k; MAE/RMSE on the extreme test windows, selection
/// by the extreme evaluation loss.
SweepResult finetune_sweep(const nn::ParamSet& params, const dataio::SplitResult& split,
                           const dataio::Normalizer& normalizer, std::span<const std::size_t> ks,
                           const FreezeSpec& spec, const train::TrainConfig& base);

void write_sweep_csv(std::ostream& out, const SweepResult& sweep);

}  // namespace tailcast::finetune
