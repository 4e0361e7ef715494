// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "tailcast/eval.hpp"

using namespace tailcast;
using namespace tailcast::eval;
using tailcast::testing::error_kind_of;
using tailcast::testing::pair_windows;
using tailcast::testing::small_spec;

namespace {

std::vector<std::string> csv_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("error summaries") {
  CHECK(summarize_errors(std::vector<double>{0, 0, 0}).mae == 0.0);
  const auto s = summarize_errors(std::vector<double>{1, -1, 3, -3});
  CHECK(s.mae == 2.0);
  CHECK(std::abs(s.rmse - std::sqrt(5.0)) <= 1e-15);
  CHECK(s.count == 4);
}

TEST_CASE("rmse dominates mae and order does not matter") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(1 + trial);
    for (auto& v : r) v = n(rng);
    const auto a = summarize_errors(r);
    CHECK(a.rmse >= a.mae);
    std::shuffle(r.begin(), r.end(), rng);
    const auto b = summarize_errors(r);
    CHECK(std::abs(a.mae - b.mae) <= 1e-12 * a.mae);
    CHECK(std::abs(a.rmse - b.rmse) <= 1e-12 * a.rmse);
  }
}

TEST_CASE("score denormalizes before comparing") {
  // raw = 2 * normalized; the model predicts normalized 1, i.e. raw 2.
  auto windows = pair_windows({0.0, 0.5, 1.5, -0.5, 2.5});
  windows[0].set_extreme(true);
  windows[2].set_extreme(true);
  const dataio::Normalizer norm({0.0}, {2.0}, {0});
  nn::ParamSet p(small_spec(1, {}, 1));
  p.bias(0)[0] = 1.0;

  const auto all = score(p, windows, norm, Subset::all);
  CHECK(all.windows == 4);
  CHECK(all.extreme_windows == 2);
  CHECK(all.normal_windows == 2);
  CHECK(all.mae == 2.0);
  CHECK(std::abs(all.rmse - std::sqrt(5.0)) <= 1e-15);
  REQUIRE(all.per_step.size() == 1);
  CHECK(all.per_step[0].mae == 2.0);
  REQUIRE(all.per_target.size() == 1);
  CHECK(all.per_target[0].name == "target_0");

  const auto ext = score(p, windows, norm, Subset::extreme);
  CHECK(ext.windows == 2);
  CHECK(ext.mae == 2.0);  // residuals 1 and 3
  CHECK(ext.rmse == std::sqrt(5.0));

  const std::vector<std::string> names{"pm25"};
  const auto j = score(p, windows, norm, Subset::normal, names).to_json();
  CHECK(j["subset"] == "normal");
  CHECK(j["per_target"][0]["name"] == "pm25");
}

TEST_CASE("score on an empty subset is an error") {
  const auto windows = pair_windows({0.0, 0.5, 1.5});
  nn::ParamSet p(small_spec(1, {}, 1));
  const dataio::Normalizer norm({0.0}, {1.0}, {0});
  CHECK(error_kind_of([&] { score(p, windows, norm, Subset::extreme); }) == ErrorKind::empty_subset);
  CHECK(parse_subset("normal") == Subset::normal);
  CHECK(error_kind_of([] { parse_subset("tail"); }) == ErrorKind::config);
}

TEST_CASE("embedding export") {
  std::vector<double> series(301);
  for (std::size_t i = 0; i < series.size(); ++i) series[i] = std::sin(0.37 * static_cast<double>(i));
  auto windows = pair_windows(series);
  for (std::size_t i = 0; i < windows.size(); i += 3) windows[i].set_extreme(true);
  nn::MlpSpec spec;
  spec.input_dim = 1;
  spec.output_dim = 1;
  const auto p = nn::init_params(spec, 5);

  std::ostringstream a, b;
  CHECK(export_embeddings(a, p, windows, {}) == 100);
  export_embeddings(b, p, windows, {});
  CHECK(a.str() == b.str());
  const auto lines = csv_lines(a.str());
  REQUIRE(lines.size() == 101);
  CHECK(std::count(lines[0].begin(), lines[0].end(), ',') == 17);
  CHECK(lines[0].rfind("origin,class,emb_0,", 0) == 0);
  for (std::size_t r = 1; r <= 100; ++r) {
    CHECK(std::count(lines[r].begin(), lines[r].end(), ',') == 17);
    CHECK((lines[r].find(r <= 50 ? ",extreme," : ",normal,") != std::string::npos));
  }

  std::ostringstream other;
  export_embeddings(other, p, windows, {50, 50, 99});
  CHECK(other.str() != a.str());

  std::ostringstream empty;
  CHECK(export_embeddings(empty, p, windows, {0, 0, 0}) == 0);
  CHECK(csv_lines(empty.str()).size() == 1);

  ScopedWarningCapture warnings;
  std::ostringstream truncated;
  CHECK(export_embeddings(truncated, p, windows, {500, 1, 0}) == 101);
  CHECK(warnings.contains("truncating"));
}
