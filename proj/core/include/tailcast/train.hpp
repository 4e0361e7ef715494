// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailcast/dataio.hpp"
#include "tailcast/nn.hpp"
#include "tailcast/reweight.hpp"

namespace tailcast::train {

enum class Strategy { unweighted, ipf, evt, meta };
enum class TrainingSubset { both, normal_only, extreme_only };

/// How the normalized meta weights enter the parameter update.
///   batch_sum:  theta -= lr * (sum_i w_i g_i + l2)        (step size of plain SGD)
///   batch_mean: theta -= lr * ((1/n) sum_i w_i g_i + l2)
enum class MetaStepScale { batch_sum, batch_mean };

std::string_view to_string(Strategy s);
std::string_view to_string(TrainingSubset s);
std::string_view to_string(MetaStepScale s);
Strategy parse_strategy(std::string_view s);
TrainingSubset parse_subset(std::string_view s);
MetaStepScale parse_meta_step_scale(std::string_view s);

struct TrainConfig {
  Strategy strategy = Strategy::unweighted;
  double learning_rate = 1e-4;
  std::size_t batch_size = 500;
  std::size_t eval_batch_size = 500;
  std::size_t max_epochs = 1000;
  std::size_t patience = 50;
  double l2 = 1e-6;
  std::uint64_t seed = 0;
  TrainingSubset training_subset = TrainingSubset::both;
  MetaStepScale meta_step_scale = MetaStepScale::batch_sum;
  std::size_t ipf_bins = 20;
  double evt_normal_weight = 1.0;
  /// GPD threshold in raw target units; when unset, evt_percentile of the
  /// training window peaks.
  std::optional<double> evt_threshold;
  double evt_percentile = 95.0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig defaults);
};

/// Column-per-sample batch assembled from windows.
struct SampleBatch {
  nn::Matrix x;
  nn::Matrix y;
  std::size_t size() const { return static_cast<std::size_t>(x.cols()); }
};

SampleBatch make_batch(std::span<const dataio::WindowSample> windows, std::span<const std::size_t> indices);
SampleBatch make_batch(std::span<const dataio::WindowSample> windows);

struct BatchWeightStats {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double zero_fraction = 0.0;
  double sum = 0.0;
};

BatchWeightStats summarize_weights(std::span<const double> weights, std::size_t epoch, std::size_t batch);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
};

struct TrainReport {
  Strategy strategy = Strategy::unweighted;
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  double best_eval_loss = 0.0;
  std::string best_checkpoint;
  std::string monitor = "eval_extreme";
  std::string dropout_mask_policy;
  std::vector<BatchWeightStats> weight_stats;

  nlohmann::json to_json() const;
  void write_weight_stats_csv(std::ostream& out) const;
};

/// theta - lr * gradient on trainable layers; frozen entries are untouched.
nn::ParamSet sgd_step(const nn::ParamSet& params, const nn::Vector& gradient, double learning_rate,
                      const nn::TrainableMask& mask, std::string_view where = "");
void sgd_update(nn::ParamSet& params, const nn::Vector& gradient, double learning_rate,
                const nn::TrainableMask& mask, std::string_view where = "");

/// Mean unweighted per-sample MSE in inference mode.
double evaluation_loss(const nn::ParamSet& params, const SampleBatch& batch);

struct StaticWeights {
  reweight::WeightVector weights;
  std::optional<reweight::BinHistogram> histogram;
  std::optional<reweight::GpdFit> gpd;
};

/// Training-set weights for the static strategies, computed over window
/// peaks (raw target units). Unweighted and meta yield all-ones.
StaticWeights compute_static_weights(Strategy strategy, std::span<const dataio::WindowSample> train,
                                     const TrainConfig& config);

struct EpochResult {
  nn::ParamSet params;
  double loss = 0.0;
};

/// One pass of seeded, shuffled mini-batch SGD on sum_i (w_i / n) * loss_i.
EpochResult weighted_epoch(const nn::ParamSet& params, std::span<const dataio::WindowSample> train,
                           std::span<const double> weights, const TrainConfig& config,
                           std::size_t epoch, const nn::TrainableMask& mask,
                           std::vector<BatchWeightStats>* audit = nullptr);

struct MetaStepResult {
  nn::ParamSet params;
  reweight::WeightVector weights;
  double train_loss = 0.0;
  double eval_loss = 0.0;
};

/// One meta-reweighting update. Weights start at zero, so the look-ahead
/// parameters equal the current ones and the evaluation gradient is taken at
/// theta_t; weights are the rectified, normalized alignments of per-sample
/// training gradients with it. One dropout mask (seeded by dropout_seed) is
/// shared by the train and eval passes.
MetaStepResult meta_train_step(const nn::ParamSet& params, const SampleBatch& train, const SampleBatch& eval,
                               const TrainConfig& config, std::uint64_t dropout_seed,
                               const nn::TrainableMask& mask);

EpochResult meta_epoch(const nn::ParamSet& params, std::span<const dataio::WindowSample> train,
                       std::span<const dataio::WindowSample> eval, const TrainConfig& config,
                       std::size_t epoch, const nn::TrainableMask& mask,
                       std::vector<BatchWeightStats>* audit = nullptr);

struct FitOptions {
  /// Aligned to split.train; required for ipf/evt.
  const reweight::WeightVector* static_weights = nullptr;
  std::optional<nn::TrainableMask> mask;
  /// Treat the starting parameters as epoch 0 when selecting the best epoch.
  bool include_initial = false;
};

struct FitResult {
  nn::ParamSet best;
  TrainReport report;
};

/// Epoch loop with early stopping on the extreme evaluation set.
FitResult fit(const nn::ParamSet& initial, const dataio::SplitResult& split, const TrainConfig& config,
              const FitOptions& options = {});

/// Windows of `pool` selected by the training subset, with their indices.
std::vector<std::size_t> subset_indices(std::span<const dataio::WindowSample> pool, TrainingSubset subset);

// ---------------------------------------------------------------------------
// Monotonicity harness: linear model, quadratic loss.

struct QuadraticToy {
  SampleBatch train;
  SampleBatch eval;
  nn::ParamSet initial;
  nn::Vector optimum;  // noise-free generating parameters
};

/// Realizable linear-regression toy: inputs ~ U(-1, 1), targets from a shared
/// random parameter vector, start point at distance ~1 from it.
QuadraticToy make_quadratic_toy(std::uint64_t seed, std::size_t inputs = 2, std::size_t train_points = 8,
                                std::size_t eval_points = 4);

struct SmoothnessConstants {
  double lipschitz = 0.0;       // largest eigenvalue of the evaluation-loss Hessian
  double gradient_bound = 0.0;  // max per-sample gradient norm over the sweep box
  double step_limit = 0.0;      // 2n / (L sigma^2)
};

SmoothnessConstants estimate_smoothness(const QuadraticToy& toy, std::size_t grid_points = 11);

struct MonotonicityReport {
  SmoothnessConstants constants;
  double learning_rate = 0.0;
  std::vector<double> eval_loss;  // L(theta_t), t = 0..steps
  double max_increase = 0.0;
  std::size_t violations = 0;
  bool pass = false;
};

MonotonicityReport monotonicity_harness(const QuadraticToy& toy, double learning_rate,
                                              std::size_t steps, double tolerance = 1e-12);

/// Deterministic 64-bit mixing of seeds and counters.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace tailcast::train
