// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numerical kernels.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tailcast/nn.hpp"

namespace tailcast::oracle {

/// Per hidden layer, one scale per unit (0 or 1/(1-p)); empty means no dropout.
using UnitMasks = std::vector<std::vector<double>>;

/// Plain-loop MLP forward on one sample. theta is laid out layer by layer as a
/// row-major (out x in) weight block followed by the bias.
std::vector<double> naive_forward(const nn::MlpSpec& spec, const std::vector<double>& theta,
                                  const std::vector<double>& x, const UnitMasks& masks = {});

/// Mean squared error over the outputs.
double naive_loss(const nn::MlpSpec& spec, const std::vector<double>& theta, const std::vector<double>& x,
                  const std::vector<double>& y, const UnitMasks& masks = {});

/// Central differences of naive_loss with respect to every theta entry.
std::vector<double> fd_gradient(const nn::MlpSpec& spec, const std::vector<double>& theta,
                                const std::vector<double>& x, const std::vector<double>& y, const UnitMasks& masks,
                                double h);

/// Masks of sample `column` as recorded in a forward trace.
UnitMasks masks_from_trace(const nn::ForwardTrace& trace, std::size_t column);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-4);

/// Every origin o such that rows o .. o+alpha+beta-1 are consecutive hours.
std::vector<std::size_t> enumerate_window_origins(const std::vector<std::int64_t>& hours, std::size_t alpha,
                                                  std::size_t beta);

/// Linear model y = a.x + b on scalar outputs, samples given as rows.
struct LinearToy {
  std::vector<std::vector<double>> train_x, eval_x;
  std::vector<double> train_y, eval_y;
  std::vector<double> theta;  // weights then bias
};

/// Weights obtained by differentiating the evaluation loss through one inner
/// SGD step theta(w) = theta - phi * sum_i w_i grad loss_i numerically at w = 0
/// (each w_j perturbed by +-h), then a weight step of size eta from zero,
/// rectification and normalization.
std::vector<double> bilevel_weights(const LinearToy& toy, double phi, double eta, double h);

}  // namespace tailcast::oracle
