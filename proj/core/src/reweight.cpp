// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/reweight.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tailcast/diagnostics.hpp"

namespace tailcast::reweight {

double WeightVector::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

double WeightVector::mean() const {
  return values.empty() ? 0.0 : sum() / static_cast<double>(values.size());
}

void rescale_to_unit_mean(std::vector<double>& weights) {
  if (weights.empty()) return;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total))
    fail(ErrorKind::domain, "cannot rescale weights with non-positive or non-finite total");
  const double scale = static_cast<double>(weights.size()) / total;
  for (auto& w : weights) w *= scale;
}

std::size_t BinHistogram::bin_of(double value) const {
  const auto it = std::upper_bound(edges.begin(), edges.end(), value);
  const auto idx = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins()) - 1));
}

BinHistogram histogram_with_edges(std::span<const double> values, std::vector<double> edges) {
  if (edges.size() < 3) fail(ErrorKind::config, "histogram needs at least two bins");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) fail(ErrorKind::config, "histogram edges must be strictly increasing");
  BinHistogram h;
  h.edges = std::move(edges);
  h.counts.assign(h.edges.size() - 1, 0);
  for (double v : values) ++h.counts[h.bin_of(v)];
  h.bin_weights.resize(h.counts.size());
  for (std::size_t j = 0; j < h.counts.size(); ++j)
    h.bin_weights[j] = h.counts[j] > 0 ? 1.0 / static_cast<double>(h.counts[j]) : 0.0;
  return h;
}

BinHistogram equal_width_histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) fail(ErrorKind::empty_subset, "histogram of an empty sample");
  if (bins < 2) fail(ErrorKind::config, "histogram needs at least two bins");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) fail(ErrorKind::degenerate, "all values identical: histogram collapses to a single bin");
  std::vector<double> edges(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t j = 0; j < bins; ++j) edges[j] = lo + width * static_cast<double>(j);
  edges[bins] = hi;
  return histogram_with_edges(values, std::move(edges));
}

std::vector<double> ipf_raw_weights(const BinHistogram& histogram, std::span<const double> values) {
  std::vector<double> w;
  w.reserve(values.size());
  for (double v : values) w.push_back(histogram.bin_weights[histogram.bin_of(v)]);
  return w;
}

IpfResult ipf_weights(std::span<const double> values, std::size_t bins) {
  IpfResult r;
  r.histogram = equal_width_histogram(values, bins);
  r.weights.values = ipf_raw_weights(r.histogram, values);
  r.weights.scheme = WeightScheme::ipf;
  rescale_to_unit_mean(r.weights.values);
  return r;
}

std::vector<double> evt_raw_weights(std::span<const double> values, const GpdFit& fit, double c) {
  if (!(c > 0.0)) fail(ErrorKind::config, "normal-sample weight c must be positive");
  if (!(fit.sigma > 0.0) || !(fit.p_tail > 0.0 && fit.p_tail < 1.0))
    fail(ErrorKind::config, "invalid GPD fit");
  const double bound = fit.upper_bound();
  std::vector<double> w;
  w.reserve(values.size());
  for (double y : values) {
    if (y < fit.mu) {
      w.push_back(c);
      continue;
    }
    if (y >= bound) y = bound - 1e-9;
    const double weight = 1.0 / fit.survival(y);
    if (!std::isfinite(weight))
      fail(ErrorKind::domain, "EVT weight is not finite at y = " + std::to_string(y));
    w.push_back(weight);
  }
  return w;
}

WeightVector evt_weights(std::span<const double> values, const GpdFit& fit, double c) {
  WeightVector r;
  r.values = evt_raw_weights(values, fit, c);
  r.scheme = WeightScheme::evt;
  rescale_to_unit_mean(r.values);
  for (double v : r.values)
    if (!std::isfinite(v)) fail(ErrorKind::domain, "EVT weights overflow after rescaling");
  return r;
}

WeightVector meta_weights_from_alignment(std::span<const double> alignments) {
  WeightVector r;
  r.scheme = WeightScheme::meta;
  r.sums_to_one = true;
  r.values.resize(alignments.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alignments.size(); ++i) {
    if (!std::isfinite(alignments[i])) fail(ErrorKind::domain, "non-finite gradient alignment");
    r.values[i] = std::max(alignments[i], 0.0);
    total += r.values[i];
  }
  const double denom = total + (total == 0.0 ? 1.0 : 0.0);
  for (auto& w : r.values) w /= denom;
  return r;
}

WeightVector meta_weights(std::span<const Eigen::VectorXd> train_grads, const Eigen::VectorXd& eval_grad) {
  std::vector<double> dots;
  dots.reserve(train_grads.size());
  for (const auto& g : train_grads) {
    if (g.size() != eval_grad.size())
      fail(ErrorKind::dimension, "training gradient length " + std::to_string(g.size()) +
                                     " differs from evaluation gradient length " +
                                     std::to_string(eval_grad.size()));
    dots.push_back(eval_grad.dot(g));
  }
  return meta_weights_from_alignment(dots);
}

void write_weights_csv(std::ostream& out, std::span<const std::size_t> origins, const WeightVector& weights) {
  if (origins.size() != weights.size()) fail(ErrorKind::dimension, "origin and weight counts differ");
  out << "origin,weight\n";
  char buf[64];
  for (std::size_t i = 0; i < origins.size(); ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), weights.values[i]);
    out << origins[i] << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
  }
}

}  // namespace tailcast::reweight
