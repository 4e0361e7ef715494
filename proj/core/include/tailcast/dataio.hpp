// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace tailcast::dataio {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Column selection for CSV ingestion. An empty feature list means "every
/// column except the timestamp". Targets must be features.
struct CsvSchema {
  std::string timestamp_column = "timestamp";
  std::vector<std::string> features;
  std::vector<std::string> targets;
};

/// Hourly multivariate observations. Rows with non-finite cells are removed at
/// ingestion, so consecutive timestamps may differ by more than one hour; such
/// gaps split the series into contiguous segments.
struct TimeSeriesFrame {
  std::vector<std::int64_t> timestamps;  // epoch hours, strictly increasing
  RowMatrix values;                      // rows x features
  std::vector<std::string> feature_names;
  std::vector<std::size_t> target_indices;
  std::size_t dropped_rows = 0;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t feature_index(const std::string& name) const;

  /// Half-open row ranges with uniform one-hour spacing.
  std::vector<std::array<std::size_t, 2>> segments() const;

  /// Checks every invariant; throws on violation.
  void validate() const;
};

/// Parses "YYYY-MM-DD[(T| )HH[:MM[:SS]]][Z]" or integral epoch seconds into
/// epoch hours. Returns nullopt for malformed text or times off the hour.
std::optional<std::int64_t> parse_timestamp_hours(std::string_view text);

TimeSeriesFrame read_csv(std::istream& in, const CsvSchema& schema);
TimeSeriesFrame load_csv(const std::filesystem::path& path, const CsvSchema& schema);
void write_csv(std::ostream& out, const TimeSeriesFrame& frame);

/// Per-feature min-max scaling fit on the training prefix.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> min, std::vector<double> max,
             std::vector<std::size_t> target_indices);

  double transform(std::size_t feature, double value) const;
  double inverse_transform(std::size_t feature, double value) const;
  /// Denormalizes the k-th target (k indexes target_indices).
  double inverse_target(std::size_t k, double value) const;

  RowMatrix transform(const RowMatrix& raw) const;

  const std::vector<double>& min() const { return min_; }
  const std::vector<double>& max() const { return max_; }
  const std::vector<std::size_t>& target_indices() const { return targets_; }

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);

 private:
  std::vector<double> min_;
  std::vector<double> max_;
  std::vector<std::size_t> targets_;
};

/// Number of leading rows that form the training segment.
std::size_t training_rows(std::size_t rows, double train_fraction);

Normalizer fit_normalizer(const TimeSeriesFrame& frame, double train_fraction);

/// Normalized copy of a frame shared by every window cut from it.
struct NormalizedSeries {
  RowMatrix values;
  std::vector<std::size_t> target_indices;
};

/// One (look-back, prediction) pair. Input and target data are views into a
/// shared normalized series; x() is alpha*d values in time-major order and
/// y() is beta*d* target values in time-major order.
class WindowSample {
 public:
  WindowSample(std::shared_ptr<const NormalizedSeries> series, std::size_t origin,
               std::size_t alpha, std::size_t beta, double target_peak);

  std::size_t origin() const { return origin_; }
  std::size_t alpha() const { return alpha_; }
  std::size_t beta() const { return beta_; }
  /// One past the last raw row covered by the window.
  std::size_t end() const { return origin_ + alpha_ + beta_; }
  bool extreme() const { return extreme_; }
  void set_extreme(bool flag) { extreme_ = flag; }
  /// Raw-unit max of the first target over the prediction window.
  double target_peak() const { return target_peak_; }

  std::size_t input_size() const;
  std::size_t output_size() const;

  Eigen::Map<const Eigen::VectorXd> x() const;
  Eigen::VectorXd y() const;
  void copy_x(Eigen::Ref<Eigen::VectorXd> out) const;
  void copy_y(Eigen::Ref<Eigen::VectorXd> out) const;

 private:
  std::shared_ptr<const NormalizedSeries> series_;
  std::size_t origin_;
  std::size_t alpha_;
  std::size_t beta_;
  double target_peak_;
  bool extreme_ = false;
};

/// Windows per contiguous segment, in origin order. Segments shorter than
/// alpha+beta contribute nothing; an empty result is reported as a warning.
std::vector<WindowSample> make_windows(const TimeSeriesFrame& frame, const Normalizer& normalizer,
                                       std::size_t alpha, std::size_t beta);

enum class ExtremeMode { target, covariate };

struct ExtremeRule {
  ExtremeMode mode = ExtremeMode::target;
  /// Target or covariate column; empty selects the first target.
  std::string variable;
  double percentile = 95.0;
};

/// Linear interpolation between order statistics.
double percentile(std::span<const double> values, double pct);

struct LabelResult {
  std::vector<WindowSample> windows;
  double threshold = 0.0;
  std::size_t variable = 0;
  std::size_t extreme_count = 0;
};

/// Flags windows whose aggregate strictly exceeds the threshold computed from
/// raw values in rows [0, reference_rows). The aggregate is the max over the
/// prediction window (target mode) or over the look-back window (covariate
/// mode).
LabelResult label_extremes(std::span<const WindowSample> windows, const TimeSeriesFrame& frame,
                           const ExtremeRule& rule, std::size_t reference_rows);

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct SplitResult {
  std::vector<WindowSample> train;
  std::vector<WindowSample> validation;
  std::vector<WindowSample> test;
  std::vector<WindowSample> eval_extreme;
  std::array<std::size_t, 2> cuts{};  // raw-row boundaries train|val and val|test
  std::size_t dropped_windows = 0;

  nlohmann::json manifest() const;
};

/// Assigns each window to the split that holds its whole raw range.
SplitResult chrono_split(std::span<const WindowSample> windows, std::size_t total_rows,
                         const SplitFractions& fractions = {});

/// Convenience: the full ingest pipeline from a frame to labeled splits.
struct PreparedData {
  Normalizer normalizer;
  SplitResult split;
  double threshold = 0.0;
  std::size_t window_count = 0;
};

PreparedData prepare(const TimeSeriesFrame& frame, std::size_t alpha, std::size_t beta,
                     const ExtremeRule& rule, const SplitFractions& fractions = {});

}  // namespace tailcast::dataio
