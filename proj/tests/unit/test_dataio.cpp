// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tailcast/dataio.hpp"

using namespace tailcast;
using namespace tailcast::dataio;
using tailcast::testing::error_kind_of;
using tailcast::testing::make_frame;

namespace {

std::string hourly_csv(std::size_t rows) {
  std::ostringstream s;
  s << "timestamp,a,b\n";
  for (std::size_t r = 0; r < rows; ++r) s << "2010-01-01T0" << r << ":00:00Z," << r << "," << 2 * r << "\n";
  return s.str();
}

}  // namespace

TEST_CASE("timestamps parse to epoch hours") {
  CHECK(parse_timestamp_hours("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_timestamp_hours("2010-01-01T00:00:00Z") == 350640);
  CHECK(parse_timestamp_hours("2010-01-01 01:00") == 350641);
  CHECK(parse_timestamp_hours("2010-01-01") == 350640);
  CHECK(parse_timestamp_hours("7200") == 2);
  CHECK_FALSE(parse_timestamp_hours("2010-01-01T01:30:00Z").has_value());
  CHECK_FALSE(parse_timestamp_hours("2010-13-01").has_value());
  CHECK_FALSE(parse_timestamp_hours("yesterday").has_value());
}

TEST_CASE("read_csv: 5 rows, 2 features, 1 target") {
  std::istringstream in(hourly_csv(5));
  const auto f = read_csv(in, {"timestamp", {}, {"b"}});
  CHECK(f.rows() == 5);
  CHECK(f.features() == 2);
  CHECK(f.target_indices == std::vector<std::size_t>{1});
  CHECK(f.values(4, 1) == 8.0);
  CHECK(f.timestamps.front() == 350640);
  CHECK(f.segments().size() == 1);
}

TEST_CASE("read_csv: missing target column names the column") {
  std::istringstream in(hourly_csv(5));
  try {
    read_csv(in, {"timestamp", {}, {"pm25"}});
    FAIL("expected schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::schema);
    CHECK(std::string(e.what()).find("pm25") != std::string::npos);
  }
}

TEST_CASE("read_csv: repeated timestamp cites the row") {
  std::istringstream in(
      "timestamp,a\n2010-01-01T00:00:00Z,1\n2010-01-01T01:00:00Z,2\n2010-01-01T01:00:00Z,3\n");
  try {
    read_csv(in, {"timestamp", {}, {"a"}});
    FAIL("expected integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::integrity);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("read_csv: unparseable cell and off-hour stamp are integrity errors") {
  std::istringstream bad_cell("timestamp,a\n0,1\n3600,x\n");
  CHECK(error_kind_of([&] { read_csv(bad_cell, {"timestamp", {}, {"a"}}); }) == ErrorKind::integrity);
  std::istringstream off_hour("timestamp,a\n0,1\n1800,2\n");
  CHECK(error_kind_of([&] { read_csv(off_hour, {"timestamp", {}, {"a"}}); }) == ErrorKind::integrity);
}

TEST_CASE("read_csv: missing values drop the row and split segments") {
  ScopedWarningCapture warnings;
  std::istringstream in("timestamp,a\n0,1\n3600,2\n7200,NA\n10800,4\n14400,5\n");
  const auto f = read_csv(in, {"timestamp", {}, {"a"}});
  CHECK(f.rows() == 4);
  CHECK(f.dropped_rows == 1);
  CHECK(warnings.contains("dropped 1"));
  const auto segs = f.segments();
  REQUIRE(segs.size() == 2);
  CHECK(segs[0] == std::array<std::size_t, 2>{0, 2});
  CHECK(segs[1] == std::array<std::size_t, 2>{2, 4});
}

TEST_CASE("write_csv round-trips") {
  const auto f = make_frame({{0.1, 0.2, 0.3}, {1e-17, -4.5, 1e300}}, {1}, 350640);
  std::stringstream s;
  write_csv(s, f);
  const auto g = read_csv(s, {"timestamp", {}, {"f1"}});
  CHECK(g.timestamps == f.timestamps);
  CHECK(g.values == f.values);
  CHECK(g.feature_names == f.feature_names);
}

TEST_CASE("normalizer examples") {
  const auto f = make_frame({{0.0, 5.0, 10.0}});
  const auto n = fit_normalizer(f, 1.0);
  CHECK(n.min()[0] == 0.0);
  CHECK(n.max()[0] == 10.0);
  CHECK(n.transform(0, 5.0) == 0.5);
  CHECK(n.inverse_transform(0, 0.5) == 5.0);
  CHECK(n.inverse_target(0, 1.0) == 10.0);

  const auto constant = make_frame({{1.0, 2.0, 3.0}, {7.0, 7.0, 7.0}});
  CHECK(error_kind_of([&] { fit_normalizer(constant, 1.0); }) == ErrorKind::degenerate);
}

TEST_CASE("normalizer uses only the training prefix") {
  auto f = make_frame({{0.0, 1.0, 2.0, 3.0, 100.0, -50.0, 4.0, 5.0, 6.0, 7.0}});
  const auto n = fit_normalizer(f, 0.4);
  CHECK(n.min()[0] == 0.0);
  CHECK(n.max()[0] == 3.0);
  f.values(9, 0) = 1e9;
  CHECK(fit_normalizer(f, 0.4).max()[0] == 3.0);
}

TEST_CASE("normalizer round-trip property") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<double> col(200);
  for (auto& v : col) v = u(rng);
  const auto n = fit_normalizer(make_frame({col}), 1.0);
  for (double v : col) CHECK(std::abs(n.inverse_transform(0, n.transform(0, v)) - v) <= 1e-12 * std::max(1.0, std::abs(v)));
  const auto back = Normalizer::from_json(n.to_json());
  CHECK(back.min() == n.min());
  CHECK(back.max() == n.max());
}

TEST_CASE("window counts") {
  auto ramp = [](std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i);
    return v;
  };
  {
    const auto f = make_frame({ramp(100)});
    CHECK(make_windows(f, fit_normalizer(f, 1.0), 72, 12).size() == 17);
  }
  {
    const auto f = make_frame({ramp(84)});
    CHECK(make_windows(f, fit_normalizer(f, 1.0), 72, 12).size() == 1);
  }
  {
    ScopedWarningCapture warnings;
    const auto f = make_frame({ramp(83)});
    CHECK(make_windows(f, fit_normalizer(f, 1.0), 72, 12).empty());
    CHECK(warnings.messages().size() == 1);
  }
}

TEST_CASE("windows never span gaps: origins match brute-force enumeration") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution gap(0.03);
  auto f = make_frame({std::vector<double>(400, 0.0)});
  std::int64_t hour = 0;
  for (std::size_t r = 0; r < f.rows(); ++r) {
    hour += gap(rng) ? 3 : 1;
    f.timestamps[r] = hour;
    f.values(static_cast<Eigen::Index>(r), 0) = static_cast<double>(r % 17);
  }
  for (auto [alpha, beta] : {std::pair<std::size_t, std::size_t>{5, 2}, {12, 3}, {1, 1}}) {
    const auto windows = make_windows(f, fit_normalizer(f, 1.0), alpha, beta);
    const auto expected = oracle::enumerate_window_origins(f.timestamps, alpha, beta);
    REQUIRE(windows.size() == expected.size());
    for (std::size_t i = 0; i < windows.size(); ++i) CHECK(windows[i].origin() == expected[i]);
  }
}

TEST_CASE("window contents are time-major views of the normalized series") {
  const auto f = make_frame({{0, 1, 2, 3, 4, 5, 6, 7, 8, 10}, {10, 9, 8, 7, 6, 5, 4, 3, 2, 0}}, {0, 1});
  const auto n = fit_normalizer(f, 1.0);
  const auto w = make_windows(f, n, 3, 2);
  REQUIRE(w.size() == 6);
  const auto x = w[2].x();
  REQUIRE(x.size() == 6);
  CHECK(x[0] == doctest::Approx(0.2));   // row 2, feature 0
  CHECK(x[1] == doctest::Approx(0.8));   // row 2, feature 1
  CHECK(x[4] == doctest::Approx(0.4));   // row 4, feature 0
  const auto y = w[2].y();
  REQUIRE(y.size() == 4);
  CHECK(y[0] == doctest::Approx(0.5));   // row 5, target 0
  CHECK(y[1] == doctest::Approx(0.5));   // row 5, target 1
  CHECK(y[2] == doctest::Approx(0.6));
  CHECK(w[2].target_peak() == 6.0);
}

TEST_CASE("percentile interpolates between order statistics") {
  const std::vector<double> v{4, 1, 3, 2};
  CHECK(percentile(v, 50) == 2.5);
  CHECK(percentile(v, 0) == 1.0);
  CHECK(percentile(v, 100) == 4.0);
  CHECK(error_kind_of([] { percentile(std::vector<double>{}, 50); }) == ErrorKind::empty_subset);
}

TEST_CASE("labeling: flat series has no extremes") {
  const auto f = make_frame({std::vector<double>(50, 3.0), [] {
                               std::vector<double> v(50);
                               for (std::size_t i = 0; i < 50; ++i) v[i] = static_cast<double>(i);
                               return v;
                             }()},
                            {0});
  auto n = Normalizer({0.0, 0.0}, {1.0, 49.0}, {0});
  const auto windows = make_windows(f, n, 4, 2);
  const auto labels = label_extremes(windows, f, {}, 35);
  CHECK(labels.extreme_count == 0);
}

TEST_CASE("labeling: a single spike flags exactly the windows that predict it") {
  const std::size_t alpha = 6, beta = 4, spike = 30;
  std::vector<double> v(60, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01 * static_cast<double>(i % 5);
  v[spike] = 50.0;
  const auto f = make_frame({v});
  const auto windows = make_windows(f, fit_normalizer(f, 1.0), alpha, beta);
  const auto labels = label_extremes(windows, f, {}, f.rows());
  CHECK(labels.extreme_count == beta);
  for (const auto& w : labels.windows) {
    const bool covers = w.origin() + alpha <= spike && spike < w.end();
    CHECK(w.extreme() == covers);
  }
}

TEST_CASE("labeling: covariate mode aggregates the look-back window") {
  std::vector<double> target(40, 0.0), cov(40, 0.0);
  for (std::size_t i = 0; i < 40; ++i) target[i] = static_cast<double>(i % 3);
  cov[10] = 9.0;
  auto f = make_frame({target, cov});
  f.feature_names = {"y", "c"};
  const auto windows = make_windows(f, Normalizer({0, 0}, {2, 9}, {0}), 5, 2);
  const auto labels = label_extremes(windows, f, {ExtremeMode::covariate, "c", 95.0}, 40);
  CHECK(labels.extreme_count == 5);
  for (const auto& w : labels.windows) CHECK(w.extreme() == (w.origin() <= 10 && 10 < w.origin() + 5));
  CHECK(error_kind_of([&] { label_extremes(windows, f, {ExtremeMode::covariate, "nope", 95.0}, 40); }) ==
        ErrorKind::schema);
}

TEST_CASE("threshold ignores data outside the training segment") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> v(1000);
  for (auto& x : v) x = g(rng);
  auto f = make_frame({v});
  const auto n = fit_normalizer(f, 0.7);
  const auto base = label_extremes(make_windows(f, n, 10, 2), f, {}, 700);
  for (std::size_t r = 700; r < 1000; ++r) f.values(static_cast<Eigen::Index>(r), 0) *= 10.0;
  const auto changed = label_extremes(make_windows(f, n, 10, 2), f, {}, 700);
  CHECK(base.threshold == changed.threshold);
  for (std::size_t i = 0; i < base.windows.size(); ++i)
    if (base.windows[i].end() <= 700) CHECK(base.windows[i].extreme() == changed.windows[i].extreme());
}

TEST_CASE("chronological split holds whole windows only") {
  std::vector<double> v(1083);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.1 * static_cast<double>(i)) + (i % 97 == 0 ? 5.0 : 0.0);
  const auto f = make_frame({v});
  const auto data = prepare(f, 72, 12, {}, {});
  const auto& s = data.split;
  CHECK(data.window_count == 1000);
  const auto c1 = s.cuts[0], c2 = s.cuts[1];
  CHECK(c1 == 758);
  CHECK(c2 == 920);
  std::size_t train = 0, val = 0, test = 0, dropped = 0;
  for (std::size_t o = 0; o + 84 <= 1083; ++o) {
    if (o + 84 <= c1) ++train;
    else if (o >= c1 && o + 84 <= c2) ++val;
    else if (o >= c2) ++test;
    else ++dropped;
  }
  CHECK(s.train.size() == train);
  CHECK(s.validation.size() == val);
  CHECK(s.test.size() == test);
  CHECK(s.dropped_windows == dropped);
  CHECK(static_cast<double>(s.train.size()) == doctest::Approx(700).epsilon(0.05));
  for (const auto& w : s.train) CHECK(w.end() <= c1);
  for (const auto& w : s.validation) CHECK((w.origin() >= c1 && w.end() <= c2));
  for (const auto& w : s.test) CHECK(w.origin() >= c2);
  for (const auto& w : s.eval_extreme) CHECK(w.extreme());

  const auto again = prepare(f, 72, 12, {}, {});
  CHECK(again.split.manifest() == s.manifest());
}

TEST_CASE("split warns when the evaluation set is empty") {
  std::vector<double> v(300);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i < 210 ? static_cast<double>(i % 10) : 0.0;
  ScopedWarningCapture warnings;
  const auto data = prepare(make_frame({v}), 5, 1, {}, {});
  CHECK(data.split.eval_extreme.empty());
  CHECK(warnings.contains("meta strategy is unavailable"));
}

TEST_CASE("split fractions must sum to one") {
  CHECK(error_kind_of([] { chrono_split({}, 10, {0.5, 0.2, 0.2}); }) == ErrorKind::config);
}
