// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "tailcast/diagnostics.hpp"
#include "tailcast/train.hpp"

namespace tailcast::train {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Design matrix with a trailing column of ones (the bias input).
nn::Matrix augmented(const nn::Matrix& x) {
  nn::Matrix a(x.rows() + 1, x.cols());
  a.topRows(x.rows()) = x;
  a.row(x.rows()).setOnes();
  return a;
}

}  // namespace

QuadraticToy make_quadratic_toy(std::uint64_t seed, std::size_t inputs, std::size_t train_points,
                                std::size_t eval_points) {
  if (inputs == 0 || train_points == 0 || eval_points == 0)
    fail(ErrorKind::config, "toy problem needs positive sizes");
  nn::MlpSpec spec;
  spec.input_dim = inputs;
  spec.hidden_widths = {};
  spec.output_dim = 1;
  spec.dropout_rate = 0.0;

  std::mt19937_64 rng(seed);
  const auto p = static_cast<Eigen::Index>(inputs);
  QuadraticToy toy;
  toy.optimum.resize(p + 1);
  for (Eigen::Index j = 0; j <= p; ++j) toy.optimum[j] = uniform(rng, -1.0, 1.0);

  auto draw = [&](std::size_t count) {
    SampleBatch b;
    b.x.resize(p, static_cast<Eigen::Index>(count));
    for (Eigen::Index c = 0; c < b.x.cols(); ++c)
      for (Eigen::Index r = 0; r < p; ++r) b.x(r, c) = uniform(rng, -1.0, 1.0);
    b.y = (toy.optimum.head(p).transpose() * b.x).array() + toy.optimum[p];
    return b;
  };
  toy.train = draw(train_points);
  toy.eval = draw(eval_points);

  // Start on a random direction at unit distance from the optimum.
  nn::Vector dir(p + 1);
  for (Eigen::Index j = 0; j <= p; ++j) dir[j] = uniform(rng, -1.0, 1.0);
  toy.initial = nn::ParamSet::unflatten(spec, toy.optimum + dir.normalized());
  return toy;
}

SmoothnessConstants estimate_smoothness(const QuadraticToy& toy, std::size_t grid_points) {
  if (grid_points < 2) fail(ErrorKind::config, "smoothness sweep needs at least two grid points per axis");
  SmoothnessConstants c;
  const nn::Matrix xe = augmented(toy.eval.x);
  const nn::Matrix hessian = (2.0 / static_cast<double>(xe.cols())) * xe * xe.transpose();
  c.lipschitz = Eigen::SelfAdjointEigenSolver<nn::Matrix>(hessian, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();

  // Box spanning the start and the optimum, widened by half its extent.
  const nn::Vector& t0 = toy.initial.flatten();
  const nn::Vector& ts = toy.optimum;
  const auto dims = t0.size();
  nn::Vector lo = t0.cwiseMin(ts), hi = t0.cwiseMax(ts);
  const nn::Vector pad = 0.5 * (hi - lo).cwiseMax(1e-3);
  lo -= pad;
  hi += pad;

  // sigma bounds the per-sample training gradient 2 r_i x~_i, whose norm is
  // 2 |r_i| |x~_i|; the sweep visits every grid vertex.
  const nn::Matrix xt = augmented(toy.train.x);
  const nn::Vector row_norms = xt.colwise().norm().transpose();
  std::vector<std::size_t> idx(static_cast<std::size_t>(dims), 0);
  nn::Vector theta(dims);
  double sigma = 0.0;
  while (true) {
    for (Eigen::Index j = 0; j < dims; ++j)
      theta[j] = lo[j] + (hi[j] - lo[j]) * static_cast<double>(idx[static_cast<std::size_t>(j)]) /
                             static_cast<double>(grid_points - 1);
    const nn::Vector resid = (theta.transpose() * xt).transpose() - toy.train.y.row(0).transpose();
    sigma = std::max(sigma, (2.0 * resid.cwiseAbs().cwiseProduct(row_norms)).maxCoeff());
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == grid_points) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  c.gradient_bound = sigma;
  const double n = static_cast<double>(toy.train.size());
  c.step_limit = 2.0 * n / (c.lipschitz * sigma * sigma);
  return c;
}

MonotonicityReport monotonicity_harness(const QuadraticToy& toy, double learning_rate, std::size_t steps,
                                              double tolerance) {
  MonotonicityReport r;
  r.constants = estimate_smoothness(toy);
  r.learning_rate = learning_rate;

  TrainConfig config;
  config.strategy = Strategy::meta;
  config.learning_rate = learning_rate;
  config.l2 = 0.0;
  config.meta_step_scale = MetaStepScale::batch_mean;
  config.batch_size = toy.train.size();
  config.eval_batch_size = toy.eval.size();
  const auto mask = nn::TrainableMask::all(toy.initial.layer_count());

  nn::ParamSet theta = toy.initial;
  r.eval_loss.push_back(evaluation_loss(theta, toy.eval));
  for (std::size_t t = 0; t < steps; ++t) {
    theta = meta_train_step(theta, toy.train, toy.eval, config, t, mask).params;
    const double next = evaluation_loss(theta, toy.eval);
    const double increase = next - r.eval_loss.back();
    r.max_increase = std::max(r.max_increase, increase);
    if (increase > tolerance) ++r.violations;
    r.eval_loss.push_back(next);
  }
  r.pass = r.violations == 0;
  return r;
}

}  // namespace tailcast::train
