// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailcast/dataio.hpp"

namespace tailcast::synth {

/// Long-tailed AR(1) target with GPD spikes plus covariates that carry signal.
///
/// target: z[t+1] = rho * z[t] + noise * e[t] + spike[t+1], z[0] = z0.
/// Spikes arrive with probability spike_prob per hour with GPD(spike_sigma,
/// spike_xi) magnitudes and then decay through the AR recursion.
///
/// Covariates, in order:
///   precursor  spike magnitude `lead` hours ahead plus small noise
///   lagged     noisy copy of the target one hour back
///   cycle_k    daily sinusoids with distinct phases plus noise
/// With covariate_spikes set, the precursor also fires unmatched surges and the
/// target absorbs only half of each spike, so extremes are best defined on the
/// covariate (covariate-mode labeling).
struct SynthSpec {
  std::size_t length = 20000;
  double rho = 0.9;
  double noise = 0.1;
  double z0 = 0.0;
  double spike_prob = 0.05;
  double spike_sigma = 2.0;
  double spike_xi = 0.2;
  std::size_t covariates = 2;
  std::size_t lead = 12;
  bool covariate_spikes = false;
  std::uint64_t seed = 0;
  std::int64_t start_hour = 350640;  // 2010-01-01T00:00Z

  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct SynthResult {
  dataio::TimeSeriesFrame frame;
  std::vector<std::size_t> spike_indices;  // rows where a spike enters the target
  std::vector<double> spike_magnitudes;
};

SynthResult generate(const SynthSpec& spec);

/// Inverse-CDF draw from GPD(sigma, xi) with location 0.
double sample_gpd(std::mt19937_64& rng, double sigma, double xi);

}  // namespace tailcast::synth
