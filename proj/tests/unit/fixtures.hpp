// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tailcast/dataio.hpp"
#include "tailcast/diagnostics.hpp"
#include "tailcast/nn.hpp"

namespace tailcast::testing {

// Hourly frame starting at hour 0; every column is a feature, `targets` index into them.
inline dataio::TimeSeriesFrame make_frame(const std::vector<std::vector<double>>& columns,
                                          std::vector<std::size_t> targets = {0},
                                          std::int64_t start = 0) {
  dataio::TimeSeriesFrame f;
  const std::size_t n = columns.front().size();
  f.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    f.feature_names.push_back("f" + std::to_string(c));
    for (std::size_t r = 0; r < n; ++r)
      f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = columns[c][r];
  }
  for (std::size_t r = 0; r < n; ++r) f.timestamps.push_back(start + static_cast<std::int64_t>(r));
  f.target_indices = std::move(targets);
  return f;
}

// Windows with alpha = beta = 1 over a single already-normalized feature:
// x = series[o], y = series[o + 1].
inline std::vector<dataio::WindowSample> pair_windows(const std::vector<double>& series, double peak = 0.0) {
  auto s = std::make_shared<dataio::NormalizedSeries>();
  s->values.resize(static_cast<Eigen::Index>(series.size()), 1);
  for (std::size_t i = 0; i < series.size(); ++i) s->values(static_cast<Eigen::Index>(i), 0) = series[i];
  s->target_indices = {0};
  std::vector<dataio::WindowSample> out;
  for (std::size_t o = 0; o + 1 < series.size(); ++o) out.emplace_back(s, o, 1, 1, peak);
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / "tailcast_unit" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline nn::MlpSpec small_spec(std::size_t in, std::vector<std::size_t> hidden, std::size_t out, double p = 0.0) {
  nn::MlpSpec s;
  s.input_dim = in;
  s.hidden_widths = std::move(hidden);
  s.output_dim = out;
  s.dropout_rate = p;
  return s;
}

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::runtime_error("expected a tailcast::Error");
}

}  // namespace tailcast::testing
