// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tailcast/diagnostics.hpp"
#include "tailcast/reweight.hpp"

namespace tailcast::reweight {

namespace {

constexpr double kExponentialBranch = 1e-9;
// Per-element switch to series expansions in xi*y, where the closed forms
// cancel catastrophically.
constexpr double kSeriesCutoff = 1e-4;

// -(1/xi) * log(1 + xi*z), the log tail factor.
double log_tail_factor(double z, double xi) {
  if (std::abs(xi) < kExponentialBranch) return -z;
  return -std::log1p(xi * z) / xi;
}

struct Derivatives {
  double value = 0.0;
  std::array<double, 2> grad{};     // d/d(log sigma), d/d(xi)
  std::array<double, 3> hess{};     // ss, sx, xx
  bool feasible = true;
};

// Log-likelihood in (s = log sigma, xi) with analytic derivatives.
Derivatives evaluate(std::span<const double> excess, double s, double xi) {
  Derivatives d;
  const double sigma = std::exp(s);
  const double n = static_cast<double>(excess.size());
  double sum_log_a = 0.0, sum_q = 0.0, sum_q_over_a = 0.0, sum_q2 = 0.0;
  double grad_xi = 0.0, hess_xx = 0.0;
  for (double z : excess) {
    const double y = z / sigma;
    const double a = 1.0 + xi * y;
    if (!(a > 0.0)) {
      d.feasible = false;
      d.value = -std::numeric_limits<double>::infinity();
      return d;
    }
    const double q = y / a;
    const double log_a = std::log1p(xi * y);
    sum_log_a += log_a;
    sum_q += q;
    sum_q_over_a += q / a;
    sum_q2 += q * q;
    if (std::abs(xi * y) < kSeriesCutoff) {
      const double y2 = y * y, y3 = y2 * y, y4 = y3 * y;
      grad_xi += 0.5 * y2 - (2.0 / 3.0) * xi * y3 + 0.75 * xi * xi * y4 - q;
      hess_xx += -(2.0 / 3.0) * y3 + 1.5 * xi * y4 + q * q;
    } else {
      grad_xi += log_a / (xi * xi) - q / xi - q;
      hess_xx += -2.0 * log_a / (xi * xi * xi) + 2.0 * q / (xi * xi) + (1.0 + 1.0 / xi) * q * q;
    }
  }
  if (std::abs(xi) < kExponentialBranch) {
    double sum_y = 0.0;
    for (double z : excess) sum_y += z / sigma;
    d.value = -n * s - sum_y;
  } else {
    d.value = -n * s - (1.0 + 1.0 / xi) * sum_log_a;
  }
  d.grad = {-n + (1.0 + xi) * sum_q, grad_xi};
  d.hess = {-(1.0 + xi) * sum_q_over_a, sum_q - (1.0 + xi) * sum_q2, hess_xx};
  return d;
}

}  // namespace

double gpd_cdf(double z, double xi) {
  if (!(z >= 0.0)) fail(ErrorKind::domain, "gpd_cdf requires z >= 0");
  if (!(1.0 + xi * z > 0.0)) fail(ErrorKind::domain, "gpd_cdf outside support: 1 + xi*z <= 0");
  return -std::expm1(log_tail_factor(z, xi));
}

double gpd_log_likelihood(std::span<const double> excess, double sigma, double xi) {
  if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  double total = -static_cast<double>(excess.size()) * std::log(sigma);
  for (double z : excess) {
    const double y = z / sigma;
    if (!(1.0 + xi * y > 0.0)) return -std::numeric_limits<double>::infinity();
    total += std::abs(xi) < kExponentialBranch ? -y : -(1.0 + 1.0 / xi) * std::log1p(xi * y);
  }
  return total;
}

double GpdFit::survival(double y) const {
  const double z = (y - mu) / sigma;
  return p_tail * std::exp(log_tail_factor(std::max(z, 0.0), xi));
}

double GpdFit::upper_bound() const {
  return xi < 0.0 ? mu - sigma / xi : std::numeric_limits<double>::infinity();
}

nlohmann::json GpdFit::to_json() const {
  return {{"mu", mu},
          {"sigma", sigma},
          {"xi", xi},
          {"p_tail", p_tail},
          {"log_likelihood", log_likelihood},
          {"exceedances", exceedances},
          {"iterations", iterations}};
}

GpdFit fit_gpd(std::span<const double> exceedances, double mu, std::size_t sample_size,
               const GpdFitOptions& options) {
  const std::size_t k = exceedances.size();
  if (k < 5)
    fail(ErrorKind::insufficient_tail,
         "need at least 5 exceedances above mu, got " + std::to_string(k));
  if (sample_size <= k)
    fail(ErrorKind::config, "sample size must exceed the exceedance count so p_tail < 1");

  std::vector<double> excess;
  excess.reserve(k);
  for (double y : exceedances) {
    if (!(y > mu) || !std::isfinite(y))
      fail(ErrorKind::domain, "exceedance " + std::to_string(y) + " is not above mu");
    excess.push_back(y - mu);
  }
  const auto [lo, hi] = std::minmax_element(excess.begin(), excess.end());
  if (*lo == *hi) fail(ErrorKind::degenerate, "all exceedances are equal");
  const double max_excess = *hi;

  // Method-of-moments start.
  const double n = static_cast<double>(k);
  const double mean = std::accumulate(excess.begin(), excess.end(), 0.0) / n;
  double var = 0.0;
  for (double z : excess) var += (z - mean) * (z - mean);
  var /= n - 1.0;
  double xi = std::clamp(0.5 * (1.0 - mean * mean / var), options.xi_min + 0.05,
                         std::min(options.xi_max - 0.05, 0.45));
  double sigma = 0.5 * mean * (1.0 + mean * mean / var);
  if (xi < 0.0) sigma = std::max(sigma, -xi * max_excess * 1.05);
  double s = std::log(sigma);

  Derivatives cur = evaluate(excess, s, xi);
  if (!cur.feasible) {
    xi = 0.1;
    s = std::log(mean);
    cur = evaluate(excess, s, xi);
  }

  std::size_t iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations; ++iter) {
    std::array<double, 2> g = cur.grad;
    const bool at_low = xi <= options.xi_min && g[1] < 0.0;
    const bool at_high = xi >= options.xi_max && g[1] > 0.0;
    if (at_low || at_high) g[1] = 0.0;
    if (std::hypot(g[0], g[1]) <= options.tolerance * n) {
      converged = true;
      break;
    }

    std::array<double, 2> step{};
    const auto [hss, hsx, hxx] = cur.hess;
    const double det = hss * hxx - hsx * hsx;
    if (!(at_low || at_high) && hss < 0.0 && det > 0.0) {
      step = {-(hxx * g[0] - hsx * g[1]) / det, -(-hsx * g[0] + hss * g[1]) / det};
    } else if (hss < 0.0 && (at_low || at_high)) {
      step = {-g[0] / hss, 0.0};
    } else {
      step = {g[0] / n, g[1] / n};
    }

    double t = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const double s_new = s + t * step[0];
      const double xi_new = std::clamp(xi + t * step[1], options.xi_min, options.xi_max);
      const auto cand = evaluate(excess, s_new, xi_new);
      if (cand.feasible && cand.value >= cur.value) {
        const double moved = std::abs(s_new - s) + std::abs(xi_new - xi);
        s = s_new;
        xi = xi_new;
        cur = cand;
        improved = true;
        if (moved < 1e-13) converged = true;
        break;
      }
    }
    if (!improved || converged) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "GPD likelihood ascent did not converge after " << iter << " iterations (sigma="
        << std::exp(s) << ", xi=" << xi << ", grad=[" << cur.grad[0] << ", " << cur.grad[1] << "])";
    fail(ErrorKind::fit, msg.str());
  }

  GpdFit fit;
  fit.mu = mu;
  fit.sigma = std::exp(s);
  fit.xi = xi;
  fit.p_tail = static_cast<double>(k) / static_cast<double>(sample_size);
  fit.log_likelihood = gpd_log_likelihood(excess, fit.sigma, fit.xi);
  fit.exceedances = k;
  fit.iterations = iter;
  return fit;
}

GpdFit fit_gpd_above(std::span<const double> sample, double mu, const GpdFitOptions& options) {
  std::vector<double> tail;
  for (double y : sample)
    if (y > mu) tail.push_back(y);
  return fit_gpd(tail, mu, sample.size(), options);
}

}  // namespace tailcast::reweight
