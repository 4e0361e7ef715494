// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailcast/dataio.hpp"
#include "tailcast/nn.hpp"

namespace tailcast::eval {

enum class Subset { extreme, normal, all };

std::string_view to_string(Subset s);
Subset parse_subset(std::string_view s);

struct ErrorSummary {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

/// MAE and RMSE of raw residuals.
ErrorSummary summarize_errors(std::span<const double> residuals);

struct StepMetrics {
  std::size_t step = 0;  // 1-based horizon step
  double mae = 0.0;
  double rmse = 0.0;
};

struct TargetMetrics {
  std::string name;
  double mae = 0.0;
  double rmse = 0.0;
  std::vector<StepMetrics> per_step;
};

/// Errors in raw target units over every (window, step, target) triple.
struct MetricsReport {
  Subset subset = Subset::extreme;
  std::size_t windows = 0;
  std::size_t extreme_windows = 0;
  std::size_t normal_windows = 0;
  double mae = 0.0;
  double rmse = 0.0;
  std::vector<StepMetrics> per_step;
  std::vector<TargetMetrics> per_target;

  nlohmann::json to_json() const;
};

std::vector<dataio::WindowSample> select(std::span<const dataio::WindowSample> windows, Subset subset);

/// Predictions and targets are denormalized before comparison. target_names
/// labels the per-target breakdown (defaults to "target_k").
MetricsReport score(const nn::ParamSet& params, std::span<const dataio::WindowSample> windows,
                    const dataio::Normalizer& normalizer, Subset subset,
                    std::span<const std::string> target_names = {});

struct EmbeddingSample {
  std::size_t extreme = 50;
  std::size_t normal = 50;
  std::uint64_t seed = 0;
};

/// Writes "origin,class,emb_0,..." rows from the last hidden layer for a
/// seeded draw of extreme and normal windows (extreme rows first, each class
/// in origin order). Returns the number of data rows written.
std::size_t export_embeddings(std::ostream& out, const nn::ParamSet& params,
                              std::span<const dataio::WindowSample> windows, const EmbeddingSample& sample);

}  // namespace tailcast::eval
