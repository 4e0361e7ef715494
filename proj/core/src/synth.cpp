// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/synth.hpp"

#include <cmath>
#include <numbers>

#include "tailcast/diagnostics.hpp"

namespace tailcast::synth {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

void SynthSpec::validate() const {
  if (!(std::abs(rho) < 1.0)) fail(ErrorKind::config, "AR coefficient must satisfy |rho| < 1");
  if (length < 2) fail(ErrorKind::config, "synthetic length must be at least 2");
  if (!(noise >= 0.0)) fail(ErrorKind::config, "noise scale must be non-negative");
  if (!(spike_prob >= 0.0 && spike_prob <= 1.0)) fail(ErrorKind::config, "spike_prob must be in [0, 1]");
  if (!(spike_sigma > 0.0)) fail(ErrorKind::config, "spike_sigma must be positive");
  if (!(spike_xi > -1.0 && spike_xi < 1.0)) fail(ErrorKind::config, "spike_xi must be in (-1, 1)");
  if (lead >= length) fail(ErrorKind::config, "lead must be shorter than the series");
}

nlohmann::json SynthSpec::to_json() const {
  return {{"length", length},         {"rho", rho},
          {"noise", noise},           {"z0", z0},
          {"spike_prob", spike_prob}, {"spike_sigma", spike_sigma},
          {"spike_xi", spike_xi},     {"covariates", covariates},
          {"lead", lead},             {"covariate_spikes", covariate_spikes},
          {"seed", seed},             {"start_hour", start_hour}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  s.length = j.value("length", s.length);
  s.rho = j.value("rho", s.rho);
  s.noise = j.value("noise", s.noise);
  s.z0 = j.value("z0", s.z0);
  s.spike_prob = j.value("spike_prob", s.spike_prob);
  s.spike_sigma = j.value("spike_sigma", s.spike_sigma);
  s.spike_xi = j.value("spike_xi", s.spike_xi);
  s.covariates = j.value("covariates", s.covariates);
  s.lead = j.value("lead", s.lead);
  s.covariate_spikes = j.value("covariate_spikes", s.covariate_spikes);
  s.seed = j.value("seed", s.seed);
  s.start_hour = j.value("start_hour", s.start_hour);
  return s;
}

double sample_gpd(std::mt19937_64& rng, double sigma, double xi) {
  const double u = unit_uniform(rng);
  if (std::abs(xi) < 1e-12) return -sigma * std::log1p(-u);
  return sigma * std::expm1(-xi * std::log1p(-u)) / xi;
}

SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.length;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Spike schedule first so the precursor can look ahead.
  std::vector<double> spikes(n + spec.lead, 0.0);
  SynthResult out;
  for (std::size_t t = 1; t < n + spec.lead; ++t) {
    if (unit_uniform(rng) < spec.spike_prob) {
      spikes[t] = sample_gpd(rng, spec.spike_sigma, spec.spike_xi);
      if (t < n) {
        out.spike_indices.push_back(t);
        out.spike_magnitudes.push_back(spikes[t]);
      }
    }
  }

  // Covariate-driven variant: the precursor also fires false alarms and the
  // target only absorbs half of each surge.
  std::vector<double> precursor(spikes);
  double response = 1.0;
  if (spec.covariate_spikes) {
    response = 0.5;
    for (std::size_t t = 1; t < n + spec.lead; ++t)
      if (unit_uniform(rng) < 0.5 * spec.spike_prob)
        precursor[t] += sample_gpd(rng, spec.spike_sigma, spec.spike_xi);
    for (auto& m : out.spike_magnitudes) m *= response;
  }

  std::vector<double> target(n);
  target[0] = spec.z0;
  for (std::size_t t = 1; t < n; ++t)
    target[t] = spec.rho * target[t - 1] + spec.noise * gauss(rng) + response * spikes[t];

  const std::size_t d = 1 + spec.covariates;
  auto& frame = out.frame;
  frame.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  frame.feature_names = {"target"};
  frame.target_indices = {0};
  for (std::size_t c = 0; c < spec.covariates; ++c) {
    if (c == 0)
      frame.feature_names.push_back("precursor");
    else if (c == 1)
      frame.feature_names.push_back("lagged");
    else
      frame.feature_names.push_back("cycle_" + std::to_string(c - 1));
  }

  const double cov_noise = 0.1 * std::max(spec.noise, 0.01);
  for (std::size_t t = 0; t < n; ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    frame.values(r, 0) = target[t];
    for (std::size_t c = 0; c < spec.covariates; ++c) {
      const auto col = static_cast<Eigen::Index>(c + 1);
      double v = 0.0;
      if (c == 0) {
        v = precursor[t + spec.lead] + cov_noise * std::abs(gauss(rng));
      } else if (c == 1) {
        v = (t > 0 ? target[t - 1] : spec.z0) + cov_noise * gauss(rng);
      } else {
        const double phase = static_cast<double>(c) * 0.7;
        v = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0 + phase) +
            cov_noise * gauss(rng);
      }
      frame.values(r, col) = v;
    }
  }

  frame.timestamps.resize(n);
  for (std::size_t t = 0; t < n; ++t) frame.timestamps[t] = spec.start_hour + static_cast<std::int64_t>(t);
  frame.validate();
  return out;
}

}  // namespace tailcast::synth
