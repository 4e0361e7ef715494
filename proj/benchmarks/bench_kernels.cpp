// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "tailcast/nn.hpp"
#include "tailcast/reweight.hpp"
#include "tailcast/synth.hpp"
#include "tailcast/train.hpp"

using namespace tailcast;

namespace {

// alpha = 72 hours of one feature, beta = 12 outputs, default depth.
nn::MlpSpec default_spec() {
  nn::MlpSpec s;
  s.input_dim = 72;
  s.output_dim = 12;
  return s;
}

train::SampleBatch random_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  train::SampleBatch b{nn::Matrix(72, static_cast<Eigen::Index>(n)), nn::Matrix(12, static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < b.x.size(); ++i) b.x.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < b.y.size(); ++i) b.y.data()[i] = u(rng);
  return b;
}

void BM_Forward(benchmark::State& state) {
  const auto p = nn::init_params(default_spec(), 1);
  const auto b = random_batch(static_cast<std::size_t>(state.range(0)), 2);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(p, b.x, nn::TrainMode{++seed}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(500);

void BM_WeightedGradient(benchmark::State& state) {
  const auto p = nn::init_params(default_spec(), 1);
  const auto b = random_batch(static_cast<std::size_t>(state.range(0)), 2);
  const auto t = nn::forward(p, b.x, nn::TrainMode{3});
  const std::vector<double> coef(b.size(), 1.0 / static_cast<double>(b.size()));
  for (auto _ : state) benchmark::DoNotOptimize(nn::weighted_gradient(p, t, b.y, coef));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WeightedGradient)->Arg(32)->Arg(500);

void BM_GradientAlignment(benchmark::State& state) {
  const auto p = nn::init_params(default_spec(), 1);
  const auto b = random_batch(static_cast<std::size_t>(state.range(0)), 2);
  const auto t = nn::forward(p, b.x, nn::TrainMode{3});
  const nn::Vector dir = nn::Vector::Ones(static_cast<Eigen::Index>(p.size()));
  for (auto _ : state) benchmark::DoNotOptimize(nn::gradient_alignment(p, t, b.y, dir));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradientAlignment)->Arg(32)->Arg(500);

// Per-example materialization, for comparison with the alignment kernel.
void BM_PerExampleGrads(benchmark::State& state) {
  const auto p = nn::init_params(default_spec(), 1);
  const auto b = random_batch(static_cast<std::size_t>(state.range(0)), 2);
  const auto t = nn::forward(p, b.x, nn::TrainMode{3});
  for (auto _ : state) benchmark::DoNotOptimize(nn::per_example_grads(p, t, b.y));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PerExampleGrads)->Arg(32)->Arg(500);

void BM_MetaTrainStep(benchmark::State& state) {
  const auto p = nn::init_params(default_spec(), 1);
  const auto train = random_batch(500, 2);
  const auto eval = random_batch(500, 3);
  train::TrainConfig config;
  const auto mask = nn::TrainableMask::all(p.layer_count());
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train::meta_train_step(p, train, eval, config, ++seed, mask));
}
BENCHMARK(BM_MetaTrainStep);

void BM_FitGpd(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::vector<double> z(static_cast<std::size_t>(state.range(0)));
  for (auto& v : z) v = synth::sample_gpd(rng, 2.0, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(reweight::fit_gpd(z, 0.0, 20 * z.size()));
}
BENCHMARK(BM_FitGpd)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
