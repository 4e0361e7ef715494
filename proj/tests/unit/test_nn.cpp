// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tailcast/nn.hpp"

using namespace tailcast;
using namespace tailcast::nn;
using tailcast::testing::error_kind_of;
using tailcast::testing::small_spec;

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

TEST_CASE("default model is the nine-layer net") {
  MlpSpec s;
  s.input_dim = 10;
  s.output_dim = 2;
  CHECK(s.dense_layers() == 9);
  CHECK(s.layer_inputs(0) == 10);
  CHECK(s.layer_outputs(8) == 2);
  CHECK(MlpSpec::from_json(s.to_json()) == s);
  s.dropout_rate = 1.0;
  CHECK(error_kind_of([&] { s.validate(); }) == ErrorKind::config);
}

TEST_CASE("init is deterministic, fan-in bounded, zero bias") {
  const auto spec = small_spec(5, {7, 3}, 2);
  const auto a = init_params(spec, 42);
  const auto b = init_params(spec, 42);
  const auto c = init_params(spec, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.size() == 5 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    CHECK(a.bias(l).isZero());
    CHECK(a.weight(l).cwiseAbs().maxCoeff() <= std::sqrt(6.0 / static_cast<double>(spec.layer_inputs(l))));
  }
}

TEST_CASE("flatten/unflatten is the identity") {
  const auto p = init_params(small_spec(3, {4}, 2), 1);
  CHECK(ParamSet::unflatten(p.spec(), p.flatten()) == p);
  CHECK(error_kind_of([&] { ParamSet::unflatten(p.spec(), Vector::Zero(3)); }) == ErrorKind::dimension);
  const auto [wb, we] = p.weight_range(1);
  CHECK(wb == 3 * 4 + 4);
  CHECK(we == wb + 8);
}

TEST_CASE("forward examples") {
  SUBCASE("all-zero parameters predict zero") {
    ParamSet p(small_spec(3, {4, 4}, 2));
    const auto t = forward(p, random_matrix(3, 5, 1), InferMode{});
    CHECK(t.predictions().isZero());
  }
  SUBCASE("hand-computed single hidden unit") {
    ParamSet p(small_spec(1, {1}, 1));
    p.weight(0)(0, 0) = 2.0;
    p.bias(0)[0] = -0.5;
    p.weight(1)(0, 0) = 3.0;
    p.bias(1)[0] = 1.0;
    Matrix x(1, 2);
    x << 1.0, -1.0;
    const auto t = forward(p, x, InferMode{});
    CHECK(t.predictions()(0, 0) == 5.5);  // 3 * relu(1.5) + 1
    CHECK(t.predictions()(0, 1) == 1.0);  // relu(-2.5) = 0
  }
  SUBCASE("dropout 0 makes train and infer agree") {
    const auto p = init_params(small_spec(4, {6, 5}, 3), 9);
    const auto x = random_matrix(4, 7, 2);
    CHECK(forward(p, x, TrainMode{123}).predictions() == forward(p, x, InferMode{}).predictions());
  }
  SUBCASE("agrees with the plain-loop oracle") {
    const auto p = init_params(small_spec(4, {6, 5}, 3), 9);
    const auto x = random_matrix(4, 7, 2);
    const auto t = forward(p, x, InferMode{});
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const Vector col = x.col(c);
      const auto ref = oracle::naive_forward(p.spec(), to_std(p.flatten()), to_std(col));
      for (std::size_t k = 0; k < ref.size(); ++k)
        CHECK(t.predictions()(static_cast<Eigen::Index>(k), c) == doctest::Approx(ref[k]).epsilon(1e-13));
    }
  }
  SUBCASE("wrong input size") {
    const auto p = init_params(small_spec(4, {6}, 3), 9);
    CHECK(error_kind_of([&] { forward(p, random_matrix(3, 2, 1), InferMode{}); }) == ErrorKind::dimension);
  }
}

TEST_CASE("per-example loss") {
  ParamSet p(small_spec(2, {3}, 2));
  Matrix x = Matrix::Zero(2, 1);
  Matrix y = Matrix::Ones(2, 1);
  const auto t = forward(p, x, InferMode{});
  CHECK(per_example_loss(t, y)[0] == 1.0);

  const auto q = init_params(small_spec(3, {5}, 2), 4);
  const auto xs = random_matrix(3, 6, 5);
  const auto ys = random_matrix(2, 6, 6);
  const auto losses = per_example_loss(forward(q, xs, InferMode{}), ys);
  for (Eigen::Index c = 0; c < 6; ++c) {
    const Vector xc = xs.col(c), yc = ys.col(c);
    CHECK(std::abs(losses[c] - oracle::naive_loss(q.spec(), to_std(q.flatten()), to_std(xc), to_std(yc))) <= 1e-15);
  }
}

TEST_CASE("per-example gradients match finite differences, with and without dropout") {
  for (double p_drop : {0.0, 0.25}) {
    auto p = init_params(small_spec(3, {5, 4}, 2, p_drop), 17);
    // Nonzero biases keep pre-activations off the ReLU kink.
    for (std::size_t l = 0; l < p.layer_count(); ++l) p.bias(l) = random_matrix(p.bias(l).size(), 1, 30 + l).col(0);
    const auto x = random_matrix(3, 4, 18);
    const auto y = random_matrix(2, 4, 19);
    const auto t = forward(p, x, TrainMode{77});
    const auto grads = per_example_grads(p, t, y);
    REQUIRE(grads.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      const Vector xc = x.col(static_cast<Eigen::Index>(i)), yc = y.col(static_cast<Eigen::Index>(i));
      const auto fd = oracle::fd_gradient(p.spec(), to_std(p.flatten()), to_std(xc), to_std(yc),
                                          oracle::masks_from_trace(t, i), 1e-5);
      CHECK(oracle::max_relative_error(to_std(grads[i]), fd) <= 1e-5);
    }
  }
}

TEST_CASE("gradient at a perfect fit is zero") {
  const auto p = init_params(small_spec(3, {5}, 2), 3);
  const auto x = random_matrix(3, 4, 4);
  const auto t = forward(p, x, InferMode{});
  for (const auto& g : per_example_grads(p, t, t.predictions())) CHECK(g.isZero());
}

TEST_CASE("weighted gradient and alignment agree with per-example gradients") {
  const auto p = init_params(small_spec(3, {6, 4}, 2, 0.2), 21);
  const auto x = random_matrix(3, 9, 22);
  const auto y = random_matrix(2, 9, 23);
  const auto t = forward(p, x, TrainMode{5, DropoutMasking::shared});
  const auto grads = per_example_grads(p, t, y);

  std::vector<double> coef(9, 1.0 / 9.0);
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(p.size()));
  for (const auto& g : grads) mean += g / 9.0;
  CHECK((weighted_gradient(p, t, y, coef) - mean).cwiseAbs().maxCoeff() <= 1e-12);

  const Vector dir = random_matrix(p.size(), 1, 24).col(0);
  const auto align = gradient_alignment(p, t, y, dir);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double ref = dir.dot(grads[i]);
    CHECK(std::abs(align[static_cast<Eigen::Index>(i)] - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
  }
  CHECK(error_kind_of([&] { weighted_gradient(p, t, y, std::vector<double>(3, 1.0)); }) == ErrorKind::dimension);
}

TEST_CASE("stale trace is rejected") {
  auto p = init_params(small_spec(3, {4}, 1), 1);
  const auto x = random_matrix(3, 2, 2);
  const auto t = forward(p, x, InferMode{});
  p.mutable_theta()[0] += 1.0;
  CHECK(error_kind_of([&] { per_example_grads(p, t, Matrix::Zero(1, 2)); }) == ErrorKind::consistency);
}

TEST_CASE("replay reproduces recorded predictions") {
  const auto p = init_params(small_spec(3, {8, 8}, 2, 0.4), 31);
  const auto x = random_matrix(3, 6, 32);
  const auto t = forward(p, x, TrainMode{99});
  CHECK(replay(p, t) == t.predictions());
  CHECK(forward(p, x, TrainMode{99}).predictions() == t.predictions());
  CHECK_FALSE(forward(p, x, TrainMode{100}).predictions() == t.predictions());
  const auto shared = forward(p, x, TrainMode{99, DropoutMasking::shared});
  for (const auto& m : shared.dropout_masks) CHECK(m.cols() == 1);
}

TEST_CASE("dropout keeps activations unbiased") {
  const auto p = init_params(small_spec(3, {4}, 1, 0.3), 41);
  Matrix x(3, 1);
  x << 0.9, -0.2, 0.6;
  const auto infer = forward(p, x, InferMode{}).activations[0];
  const std::size_t draws = 200000;
  const Matrix batch = x.replicate(1, static_cast<Eigen::Index>(draws));
  const auto train = forward(p, batch, TrainMode{7}).activations[0];
  const Vector mean = train.rowwise().mean();
  for (Eigen::Index u = 0; u < mean.size(); ++u) {
    if (infer(u, 0) == 0.0) {
      CHECK(mean[u] == 0.0);
    } else {
      CHECK(std::abs(mean[u] / infer(u, 0) - 1.0) <= 0.01);
    }
  }
}

TEST_CASE("l2 penalty gradient") {
  auto p = ParamSet(small_spec(1, {}, 1));
  p.weight(0)(0, 0) = 3.0;
  p.bias(0)[0] = 5.0;
  const auto all = TrainableMask::all(1);
  CHECK(l2_penalty_grad(p, 0.0, all).isZero());
  const auto g = l2_penalty_grad(p, 0.5, all);
  CHECK(g[0] == 3.0);
  CHECK(g[1] == 0.0);
  CHECK(l2_penalty_grad(p, 0.5, {{false}}).isZero());
  CHECK(error_kind_of([&] { l2_penalty_grad(p, -1.0, all); }) == ErrorKind::config);
}

TEST_CASE("hidden embeddings") {
  MlpSpec spec;
  spec.input_dim = 6;
  spec.output_dim = 1;
  const auto zero = hidden_embeddings(ParamSet(spec), Matrix::Zero(6, 3));
  CHECK(zero.rows() == 16);
  CHECK(zero.isZero());

  const auto p = init_params(spec, 5);
  const auto x = random_matrix(6, 4, 6);
  const auto emb = hidden_embeddings(p, x);
  const auto trace = forward(p, x, InferMode{});
  CHECK(emb == trace.activations[spec.hidden_widths.size() - 1]);
  CHECK(error_kind_of([] { hidden_embeddings(ParamSet(small_spec(2, {}, 1)), Matrix::Zero(2, 1)); }) ==
        ErrorKind::config);
}
