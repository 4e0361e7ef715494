// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace tailcast::reweight {

enum class WeightScheme { uniform, ipf, evt, meta };

/// Per-sample loss weights. Static schemes (ipf, evt) are rescaled to mean 1
/// over the training set; meta weights sum to 1 per batch, or to 0 when no
/// sample aligns with the evaluation gradient.
struct WeightVector {
  std::vector<double> values;
  WeightScheme scheme = WeightScheme::uniform;
  bool sums_to_one = false;

  std::size_t size() const { return values.size(); }
  double sum() const;
  double mean() const;
};

/// Rescales in place so the mean is exactly representable as 1 up to rounding.
void rescale_to_unit_mean(std::vector<double>& weights);

// ---------------------------------------------------------------------------
// Inverse proportional function

struct BinHistogram {
  std::vector<double> edges;        // bins + 1 strictly increasing edges
  std::vector<std::size_t> counts;  // samples per bin
  std::vector<double> bin_weights;  // 1/n_j, 0 for empty bins

  std::size_t bins() const { return counts.size(); }
  /// Bins are [e_j, e_{j+1}) except the last, which is closed.
  std::size_t bin_of(double value) const;
};

BinHistogram histogram_with_edges(std::span<const double> values, std::vector<double> edges);
/// Equal-width bins over [min, max].
BinHistogram equal_width_histogram(std::span<const double> values, std::size_t bins);

/// 1/n_j of each sample's bin, before rescaling.
std::vector<double> ipf_raw_weights(const BinHistogram& histogram, std::span<const double> values);

struct IpfResult {
  BinHistogram histogram;
  WeightVector weights;
};

IpfResult ipf_weights(std::span<const double> values, std::size_t bins = 20);

// ---------------------------------------------------------------------------
// Generalized Pareto tail

/// Standard GPD CDF of a standardized exceedance z >= 0 with shape xi.
double gpd_cdf(double z, double xi);

/// Log-likelihood of exceedances z_i = y_i - mu under GPD(sigma, xi).
/// Returns -inf outside the support.
double gpd_log_likelihood(std::span<const double> excess, double sigma, double xi);

struct GpdFit {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
  double p_tail = 0.0;  // estimate of 1 - F(mu)
  double log_likelihood = 0.0;
  std::size_t exceedances = 0;
  std::size_t iterations = 0;

  /// Estimated 1 - F(y) for y >= mu.
  double survival(double y) const;
  /// Largest supported y when xi < 0, +inf otherwise.
  double upper_bound() const;

  nlohmann::json to_json() const;
};

struct GpdFitOptions {
  double xi_min = -0.5;
  double xi_max = 1.0;
  std::size_t max_iterations = 500;
  double tolerance = 1e-10;
};

/// Maximum likelihood fit of values strictly above mu. sample_size is the
/// number of observations the exceedances were drawn from (for p_tail).
GpdFit fit_gpd(std::span<const double> exceedances, double mu, std::size_t sample_size,
               const GpdFitOptions& options = {});

/// Selects values > mu from a full sample and fits them.
GpdFit fit_gpd_above(std::span<const double> sample, double mu, const GpdFitOptions& options = {});

/// Weights before rescaling: 1/survival(y) at or above mu, c below.
std::vector<double> evt_raw_weights(std::span<const double> values, const GpdFit& fit, double c);

WeightVector evt_weights(std::span<const double> values, const GpdFit& fit, double c = 1.0);

// ---------------------------------------------------------------------------
// Meta-learned weights

/// Rectified, normalized alignments: u_i = max(a_i, 0), w_i = u_i / (sum u + [sum u == 0]).
WeightVector meta_weights_from_alignment(std::span<const double> alignments);

/// Same rule from explicit gradients: a_i = <eval_grad, train_grads[i]>.
WeightVector meta_weights(std::span<const Eigen::VectorXd> train_grads, const Eigen::VectorXd& eval_grad);

/// "origin,weight" rows for auditing.
void write_weights_csv(std::ostream& out, std::span<const std::size_t> origins, const WeightVector& weights);

}  // namespace tailcast::reweight
