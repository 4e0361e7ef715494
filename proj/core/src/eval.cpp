// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "tailcast/diagnostics.hpp"

namespace tailcast::eval {

namespace {

struct Accumulator {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  std::size_t count = 0;

  void add(double r) {
    abs_sum += std::abs(r);
    sq_sum += r * r;
    ++count;
  }
  double mae() const { return count ? abs_sum / static_cast<double>(count) : 0.0; }
  double rmse() const { return count ? std::sqrt(sq_sum / static_cast<double>(count)) : 0.0; }
};

nlohmann::json steps_json(const std::vector<StepMetrics>& steps) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& s : steps) a.push_back({{"step", s.step}, {"mae", s.mae}, {"rmse", s.rmse}});
  return a;
}

}  // namespace

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::extreme: return "extreme";
    case Subset::normal: return "normal";
    case Subset::all: return "all";
  }
  return "?";
}

Subset parse_subset(std::string_view s) {
  if (s == "extreme") return Subset::extreme;
  if (s == "normal") return Subset::normal;
  if (s == "all") return Subset::all;
  fail(ErrorKind::config, "unknown evaluation subset '" + std::string(s) + "' (expected extreme, normal or all)");
}

ErrorSummary summarize_errors(std::span<const double> residuals) {
  Accumulator acc;
  for (double r : residuals) acc.add(r);
  return {acc.mae(), acc.rmse(), acc.count};
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : per_target)
    targets.push_back({{"name", t.name}, {"mae", t.mae}, {"rmse", t.rmse}, {"per_step", steps_json(t.per_step)}});
  return {{"subset", to_string(subset)},
          {"windows", windows},
          {"extreme_windows", extreme_windows},
          {"normal_windows", normal_windows},
          {"mae", mae},
          {"rmse", rmse},
          {"per_step", steps_json(per_step)},
          {"per_target", std::move(targets)}};
}

std::vector<dataio::WindowSample> select(std::span<const dataio::WindowSample> windows, Subset subset) {
  std::vector<dataio::WindowSample> out;
  for (const auto& w : windows)
    if (subset == Subset::all || (subset == Subset::extreme) == w.extreme()) out.push_back(w);
  return out;
}

MetricsReport score(const nn::ParamSet& params, std::span<const dataio::WindowSample> windows,
                    const dataio::Normalizer& normalizer, Subset subset,
                    std::span<const std::string> target_names) {
  const auto chosen = select(windows, subset);
  if (chosen.empty())
    fail(ErrorKind::empty_subset, "no " + std::string(to_string(subset)) + " windows to score");

  const std::size_t targets = normalizer.target_indices().size();
  const std::size_t out_dim = chosen.front().output_size();
  if (targets == 0 || out_dim % targets != 0)
    fail(ErrorKind::dimension, "window output size is not a multiple of the target count");
  if (params.spec().output_dim != out_dim)
    fail(ErrorKind::dimension, "model output size " + std::to_string(params.spec().output_dim) +
                                   " does not match window output size " + std::to_string(out_dim));
  if (!target_names.empty() && target_names.size() != targets)
    fail(ErrorKind::dimension, "target name count does not match the target count");
  const std::size_t steps = out_dim / targets;

  MetricsReport r;
  r.subset = subset;
  r.windows = chosen.size();
  r.extreme_windows = static_cast<std::size_t>(
      std::count_if(chosen.begin(), chosen.end(), [](const auto& w) { return w.extreme(); }));
  r.normal_windows = chosen.size() - r.extreme_windows;

  Accumulator total;
  std::vector<Accumulator> by_step(steps), by_target(targets), by_cell(steps * targets);

  // Chunked so large test splits do not materialize one huge activation matrix.
  constexpr std::size_t kChunk = 2048;
  for (std::size_t start = 0; start < chosen.size(); start += kChunk) {
    const std::size_t stop = std::min(chosen.size(), start + kChunk);
    nn::Matrix x(static_cast<Eigen::Index>(chosen.front().input_size()), static_cast<Eigen::Index>(stop - start));
    nn::Matrix y(static_cast<Eigen::Index>(out_dim), x.cols());
    for (std::size_t i = start; i < stop; ++i) {
      const auto c = static_cast<Eigen::Index>(i - start);
      chosen[i].copy_x(x.col(c));
      chosen[i].copy_y(y.col(c));
    }
    const auto trace = nn::forward(params, x, nn::InferMode{});
    const nn::Matrix& pred = trace.predictions();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t k = 0; k < targets; ++k) {
          const auto row = static_cast<Eigen::Index>(s * targets + k);
          const double residual =
              normalizer.inverse_target(k, pred(row, c)) - normalizer.inverse_target(k, y(row, c));
          total.add(residual);
          by_step[s].add(residual);
          by_target[k].add(residual);
          by_cell[s * targets + k].add(residual);
        }
      }
    }
  }

  r.mae = total.mae();
  r.rmse = total.rmse();
  for (std::size_t s = 0; s < steps; ++s) r.per_step.push_back({s + 1, by_step[s].mae(), by_step[s].rmse()});
  for (std::size_t k = 0; k < targets; ++k) {
    TargetMetrics t;
    t.name = target_names.empty() ? "target_" + std::to_string(k) : target_names[k];
    t.mae = by_target[k].mae();
    t.rmse = by_target[k].rmse();
    for (std::size_t s = 0; s < steps; ++s)
      t.per_step.push_back({s + 1, by_cell[s * targets + k].mae(), by_cell[s * targets + k].rmse()});
    r.per_target.push_back(std::move(t));
  }
  return r;
}

std::size_t export_embeddings(std::ostream& out, const nn::ParamSet& params,
                              std::span<const dataio::WindowSample> windows, const EmbeddingSample& sample) {
  const auto& widths = params.spec().hidden_widths;
  if (widths.empty()) fail(ErrorKind::config, "network has no hidden layer to embed from");
  const std::size_t width = widths.back();

  std::vector<std::size_t> extreme, normal;
  for (std::size_t i = 0; i < windows.size(); ++i) (windows[i].extreme() ? extreme : normal).push_back(i);

  std::mt19937_64 rng(sample.seed);
  auto draw = [&](std::vector<std::size_t>& pool, std::size_t want, const char* label) {
    if (want > pool.size()) {
      warn("requested " + std::to_string(want) + " " + label + " windows for embedding export, only " +
           std::to_string(pool.size()) + " available; truncating");
      want = pool.size();
    }
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(want);
    std::sort(pool.begin(), pool.end(),
              [&](std::size_t a, std::size_t b) { return windows[a].origin() < windows[b].origin(); });
  };
  draw(extreme, sample.extreme, "extreme");
  draw(normal, sample.normal, "normal");

  out << "origin,class";
  for (std::size_t j = 0; j < width; ++j) out << ",emb_" << j;
  out << '\n';

  std::vector<std::size_t> rows(extreme);
  rows.insert(rows.end(), normal.begin(), normal.end());
  if (rows.empty()) return 0;

  nn::Matrix x(static_cast<Eigen::Index>(windows[rows[0]].input_size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) windows[rows[c]].copy_x(x.col(static_cast<Eigen::Index>(c)));
  const nn::Matrix emb = nn::hidden_embeddings(params, x);

  const auto old_precision = out.precision(17);
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto& w = windows[rows[c]];
    out << w.origin() << ',' << (w.extreme() ? "extreme" : "normal");
    for (Eigen::Index j = 0; j < emb.rows(); ++j) out << ',' << emb(j, static_cast<Eigen::Index>(c));
    out << '\n';
  }
  out.precision(old_precision);
  return rows.size();
}

}  // namespace tailcast::eval
