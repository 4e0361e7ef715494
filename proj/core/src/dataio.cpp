// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "tailcast/diagnostics.hpp"

namespace tailcast::dataio {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "N/A" || s == "NaN" || s == "nan" || s == "NAN" ||
         s == "null" || s == "NULL";
}

// Returns false for unparseable text; missing tokens yield NaN.
bool parse_cell(std::string_view s, double& out) {
  if (is_missing_token(s)) {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  const auto* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  if (ec == std::errc::result_out_of_range) {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::size_t index_of(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? names.size() : static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::optional<std::int64_t> parse_timestamp_hours(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;

  std::int64_t seconds = 0;
  if (parse_int(text, seconds)) {
    if (seconds % 3600 != 0) return std::nullopt;
    return seconds / 3600;
  }

  // ISO-8601 subset: YYYY-MM-DD[(T| )HH[:MM[:SS]]][Z]
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d))
    return std::nullopt;
  auto rest = text.substr(10);
  if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
  if (!rest.empty()) {
    if (rest.front() != 'T' && rest.front() != ' ') return std::nullopt;
    rest.remove_prefix(1);
    if (rest.size() < 2 || !parse_int(rest.substr(0, 2), h)) return std::nullopt;
    rest.remove_prefix(2);
    if (!rest.empty()) {
      if (rest.size() < 3 || rest.front() != ':' || !parse_int(rest.substr(1, 2), mi))
        return std::nullopt;
      rest.remove_prefix(3);
    }
    if (!rest.empty()) {
      if (rest.size() != 3 || rest.front() != ':' || !parse_int(rest.substr(1, 2), se))
        return std::nullopt;
    }
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return std::nullopt;
  if (mi != 0 || se != 0) return std::nullopt;
  const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days_since_epoch) * 24 + h;
}

std::size_t TimeSeriesFrame::feature_index(const std::string& name) const {
  const auto i = index_of(feature_names, name);
  if (i == feature_names.size()) fail(ErrorKind::schema, "unknown column '" + name + "'");
  return i;
}

std::vector<std::array<std::size_t, 2>> TimeSeriesFrame::segments() const {
  std::vector<std::array<std::size_t, 2>> out;
  const std::size_t n = rows();
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i == n || timestamps[i] - timestamps[i - 1] != 1) {
      if (i > begin) out.push_back({begin, i});
      begin = i;
    }
  }
  return out;
}

void TimeSeriesFrame::validate() const {
  if (timestamps.size() != rows())
    fail(ErrorKind::integrity, "timestamp count does not match row count");
  if (feature_names.size() != features())
    fail(ErrorKind::integrity, "feature name count does not match column count");
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1])
      fail(ErrorKind::integrity, "timestamps not strictly increasing at row " + std::to_string(i + 1));
  }
  if (!values.allFinite()) fail(ErrorKind::integrity, "non-finite value in frame");
  if (target_indices.empty() || target_indices.size() > features())
    fail(ErrorKind::schema, "target count must be between 1 and the feature count");
  std::vector<bool> seen(features(), false);
  for (auto t : target_indices) {
    if (t >= features() || seen[t]) fail(ErrorKind::schema, "invalid target index");
    seen[t] = true;
  }
}

TimeSeriesFrame read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::schema, "empty CSV: missing header row");
  std::vector<std::string> header;
  for (auto cell : split_line(line)) header.emplace_back(cell);

  const auto ts_col = index_of(header, schema.timestamp_column);
  if (ts_col == header.size())
    fail(ErrorKind::schema, "missing timestamp column '" + schema.timestamp_column + "'");

  std::vector<std::string> features = schema.features;
  if (features.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != ts_col) features.push_back(header[c]);
  }
  if (schema.targets.empty()) fail(ErrorKind::schema, "at least one target column is required");
  for (const auto& t : schema.targets) {
    if (index_of(features, t) == features.size()) features.push_back(t);
  }
  std::vector<std::size_t> source_cols;
  for (const auto& f : features) {
    const auto c = index_of(header, f);
    if (c == header.size()) fail(ErrorKind::schema, "missing column '" + f + "'");
    source_cols.push_back(c);
  }

  TimeSeriesFrame frame;
  frame.feature_names = features;
  for (const auto& t : schema.targets) frame.target_indices.push_back(index_of(features, t));

  std::vector<double> cells;
  std::optional<std::int64_t> last_stamp;
  std::size_t row = 0;
  std::size_t dropped = 0;
  std::vector<double> buffer(features.size());
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto parts = split_line(line);
    if (parts.size() != header.size())
      fail(ErrorKind::integrity, "row " + std::to_string(row) + ": expected " +
                                     std::to_string(header.size()) + " cells, found " +
                                     std::to_string(parts.size()));
    const auto ts = parse_timestamp_hours(parts[ts_col]);
    if (!ts) fail(ErrorKind::integrity, "row " + std::to_string(row) + ": unparseable timestamp '" +
                                            std::string(parts[ts_col]) + "'");
    if (last_stamp && *ts <= *last_stamp)
      fail(ErrorKind::integrity, "row " + std::to_string(row) +
                                     (*ts == *last_stamp ? ": duplicate timestamp"
                                                         : ": timestamp not increasing"));
    bool finite = true;
    for (std::size_t f = 0; f < features.size(); ++f) {
      const auto cell = parts[source_cols[f]];
      if (!parse_cell(cell, buffer[f]))
        fail(ErrorKind::integrity, "row " + std::to_string(row) + ", column '" + features[f] +
                                       "': unparseable value '" + std::string(cell) + "'");
      finite = finite && std::isfinite(buffer[f]);
    }
    // Order checks use every row, including ones dropped for missing values.
    last_stamp = *ts;
    if (!finite) {
      ++dropped;
      continue;
    }
    frame.timestamps.push_back(*ts);
    cells.insert(cells.end(), buffer.begin(), buffer.end());
  }

  const auto n = frame.timestamps.size();
  if (n == 0) fail(ErrorKind::integrity, "no complete rows in CSV");
  frame.values = Eigen::Map<RowMatrix>(cells.data(), static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(features.size()));
  frame.dropped_rows = dropped;
  if (dropped > 0) warn("dropped " + std::to_string(dropped) + " rows with missing values");
  frame.validate();
  return frame;
}

TimeSeriesFrame load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const TimeSeriesFrame& frame) {
  out << "timestamp";
  for (const auto& n : frame.feature_names) out << ',' << n;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    out << frame.timestamps[r] * 3600;
    for (std::size_t c = 0; c < frame.features(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), frame.values(r, c));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

Normalizer::Normalizer(std::vector<double> min, std::vector<double> max,
                       std::vector<std::size_t> target_indices)
    : min_(std::move(min)), max_(std::move(max)), targets_(std::move(target_indices)) {
  if (min_.size() != max_.size()) fail(ErrorKind::dimension, "normalizer min/max size mismatch");
  for (std::size_t j = 0; j < min_.size(); ++j) {
    if (!(max_[j] > min_[j]))
      fail(ErrorKind::degenerate, "feature " + std::to_string(j) + " has max <= min");
  }
}

double Normalizer::transform(std::size_t feature, double value) const {
  return (value - min_[feature]) / (max_[feature] - min_[feature]);
}

double Normalizer::inverse_transform(std::size_t feature, double value) const {
  return value * (max_[feature] - min_[feature]) + min_[feature];
}

double Normalizer::inverse_target(std::size_t k, double value) const {
  return inverse_transform(targets_.at(k), value);
}

RowMatrix Normalizer::transform(const RowMatrix& raw) const {
  if (static_cast<std::size_t>(raw.cols()) != min_.size())
    fail(ErrorKind::dimension, "normalizer feature count mismatch");
  RowMatrix out(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const double lo = min_[static_cast<std::size_t>(c)];
    const double range = max_[static_cast<std::size_t>(c)] - lo;
    out.col(c) = (raw.col(c).array() - lo) / range;
  }
  return out;
}

nlohmann::json Normalizer::to_json() const {
  return {{"min", min_}, {"max", max_}, {"target_indices", targets_}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  return Normalizer(j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>(),
                    j.at("target_indices").get<std::vector<std::size_t>>());
}

std::size_t training_rows(std::size_t rows, double train_fraction) {
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows) + 1e-9));
}

Normalizer fit_normalizer(const TimeSeriesFrame& frame, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    fail(ErrorKind::config, "train_fraction must be in (0, 1]");
  const auto n_train = training_rows(frame.rows(), train_fraction);
  if (n_train == 0) fail(ErrorKind::degenerate, "training segment is empty");
  const auto head = frame.values.topRows(static_cast<Eigen::Index>(n_train));
  std::vector<double> lo(frame.features()), hi(frame.features());
  for (std::size_t j = 0; j < frame.features(); ++j) {
    lo[j] = head.col(static_cast<Eigen::Index>(j)).minCoeff();
    hi[j] = head.col(static_cast<Eigen::Index>(j)).maxCoeff();
    if (!(hi[j] > lo[j]))
      fail(ErrorKind::degenerate,
           "feature '" + frame.feature_names[j] + "' is constant in the training segment");
  }
  return Normalizer(std::move(lo), std::move(hi), frame.target_indices);
}

WindowSample::WindowSample(std::shared_ptr<const NormalizedSeries> series, std::size_t origin,
                           std::size_t alpha, std::size_t beta, double target_peak)
    : series_(std::move(series)), origin_(origin), alpha_(alpha), beta_(beta),
      target_peak_(target_peak) {}

std::size_t WindowSample::input_size() const {
  return alpha_ * static_cast<std::size_t>(series_->values.cols());
}

std::size_t WindowSample::output_size() const { return beta_ * series_->target_indices.size(); }

Eigen::Map<const Eigen::VectorXd> WindowSample::x() const {
  const double* start = series_->values.data() + origin_ * static_cast<std::size_t>(series_->values.cols());
  return Eigen::Map<const Eigen::VectorXd>(start, static_cast<Eigen::Index>(input_size()));
}

Eigen::VectorXd WindowSample::y() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(output_size()));
  copy_y(out);
  return out;
}

void WindowSample::copy_x(Eigen::Ref<Eigen::VectorXd> out) const { out = x(); }

void WindowSample::copy_y(Eigen::Ref<Eigen::VectorXd> out) const {
  const auto& targets = series_->target_indices;
  Eigen::Index k = 0;
  for (std::size_t step = 0; step < beta_; ++step) {
    const auto row = static_cast<Eigen::Index>(origin_ + alpha_ + step);
    for (auto t : targets) out[k++] = series_->values(row, static_cast<Eigen::Index>(t));
  }
}

std::vector<WindowSample> make_windows(const TimeSeriesFrame& frame, const Normalizer& normalizer,
                                       std::size_t alpha, std::size_t beta) {
  if (alpha < 1 || beta < 1) fail(ErrorKind::config, "alpha and beta must be at least 1");
  auto series = std::make_shared<NormalizedSeries>();
  series->values = normalizer.transform(frame.values);
  series->target_indices = frame.target_indices;

  const auto peak_col = static_cast<Eigen::Index>(frame.target_indices.front());
  std::vector<WindowSample> out;
  const std::size_t span = alpha + beta;
  for (const auto& [begin, end] : frame.segments()) {
    if (end - begin < span) continue;
    for (std::size_t origin = begin; origin + span <= end; ++origin) {
      const auto first = static_cast<Eigen::Index>(origin + alpha);
      const double peak =
          frame.values.col(peak_col).segment(first, static_cast<Eigen::Index>(beta)).maxCoeff();
      out.emplace_back(series, origin, alpha, beta, peak);
    }
  }
  if (out.empty())
    warn("alpha + beta = " + std::to_string(span) +
         " exceeds every contiguous segment; no windows produced");
  return out;
}

double percentile(std::span<const double> values, double pct) {
  if (values.empty()) fail(ErrorKind::empty_subset, "percentile of an empty sample");
  if (!(pct >= 0.0 && pct <= 100.0)) fail(ErrorKind::config, "percentile must be in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

LabelResult label_extremes(std::span<const WindowSample> windows, const TimeSeriesFrame& frame,
                           const ExtremeRule& rule, std::size_t reference_rows) {
  if (!(rule.percentile > 0.0 && rule.percentile < 100.0))
    fail(ErrorKind::config, "percentile must be in (0, 100)");
  if (reference_rows == 0 || reference_rows > frame.rows())
    fail(ErrorKind::config, "reference segment must be a nonempty prefix of the frame");

  std::size_t variable = 0;
  if (rule.mode == ExtremeMode::target) {
    variable = frame.target_indices.front();
    if (!rule.variable.empty()) {
      const auto v = index_of(frame.feature_names, rule.variable);
      if (v == frame.features() ||
          std::find(frame.target_indices.begin(), frame.target_indices.end(), v) ==
              frame.target_indices.end())
        fail(ErrorKind::schema, "unknown target '" + rule.variable + "'");
      variable = v;
    }
  } else {
    variable = index_of(frame.feature_names, rule.variable);
    if (rule.variable.empty() || variable == frame.features())
      fail(ErrorKind::schema, "unknown covariate '" + rule.variable + "'");
  }

  const auto column = frame.values.col(static_cast<Eigen::Index>(variable));
  std::vector<double> reference;
  reference.reserve(reference_rows);
  for (std::size_t r = 0; r < reference_rows; ++r) reference.push_back(column[static_cast<Eigen::Index>(r)]);

  LabelResult result;
  result.threshold = percentile(reference, rule.percentile);
  result.variable = variable;
  result.windows.assign(windows.begin(), windows.end());
  for (auto& w : result.windows) {
    const auto first = static_cast<Eigen::Index>(rule.mode == ExtremeMode::target ? w.origin() + w.alpha()
                                                                                  : w.origin());
    const auto len = static_cast<Eigen::Index>(rule.mode == ExtremeMode::target ? w.beta() : w.alpha());
    const double aggregate = column.segment(first, len).maxCoeff();
    w.set_extreme(aggregate > result.threshold);
    result.extreme_count += w.extreme() ? 1 : 0;
  }
  return result;
}

SplitResult chrono_split(std::span<const WindowSample> windows, std::size_t total_rows,
                         const SplitFractions& fractions) {
  if (!(fractions.train > 0 && fractions.validation > 0 && fractions.test > 0) ||
      std::abs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9)
    fail(ErrorKind::config, "split fractions must be positive and sum to 1");

  SplitResult out;
  const auto c1 = training_rows(total_rows, fractions.train);
  const auto c2 = training_rows(total_rows, fractions.train + fractions.validation);
  out.cuts = {c1, c2};
  for (const auto& w : windows) {
    if (w.end() > total_rows) fail(ErrorKind::dimension, "window exceeds the frame");
    if (w.end() <= c1) {
      out.train.push_back(w);
    } else if (w.origin() >= c1 && w.end() <= c2) {
      out.validation.push_back(w);
      if (w.extreme()) out.eval_extreme.push_back(w);
    } else if (w.origin() >= c2) {
      out.test.push_back(w);
    } else {
      ++out.dropped_windows;
    }
  }
  auto extremes = [](const std::vector<WindowSample>& v) {
    return std::count_if(v.begin(), v.end(), [](const WindowSample& w) { return w.extreme(); });
  };
  if (extremes(out.train) == 0) warn("training split has no extreme windows");
  if (out.eval_extreme.empty())
    warn("validation split has no extreme windows; the meta strategy is unavailable");
  if (extremes(out.test) == 0) warn("test split has no extreme windows");
  return out;
}

nlohmann::json SplitResult::manifest() const {
  auto origins = [](const std::vector<WindowSample>& v) {
    std::vector<std::size_t> o;
    o.reserve(v.size());
    for (const auto& w : v) o.push_back(w.origin());
    return o;
  };
  nlohmann::json j;
  j["cuts"] = cuts;
  j["dropped_windows"] = dropped_windows;
  j["train"] = origins(train);
  j["validation"] = origins(validation);
  j["test"] = origins(test);
  j["eval_extreme"] = origins(eval_extreme);
  if (!train.empty()) {
    j["alpha"] = train.front().alpha();
    j["beta"] = train.front().beta();
  }
  return j;
}

PreparedData prepare(const TimeSeriesFrame& frame, std::size_t alpha, std::size_t beta,
                     const ExtremeRule& rule, const SplitFractions& fractions) {
  PreparedData out;
  out.normalizer = fit_normalizer(frame, fractions.train);
  auto windows = make_windows(frame, out.normalizer, alpha, beta);
  out.window_count = windows.size();
  auto labeled = label_extremes(windows, frame, rule, training_rows(frame.rows(), fractions.train));
  out.threshold = labeled.threshold;
  out.split = chrono_split(labeled.windows, frame.rows(), fractions);
  return out;
}

}  // namespace tailcast::dataio
