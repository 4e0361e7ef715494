// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "tailcast/finetune.hpp"
#include "tailcast/synth.hpp"

using namespace tailcast;
using namespace tailcast::finetune;
using tailcast::testing::error_kind_of;
using tailcast::testing::pair_windows;
using tailcast::testing::small_spec;

namespace {

struct Trained {
  dataio::PreparedData data;
  nn::ParamSet params;
  train::TrainConfig config;
};

const Trained& trained() {
  static const Trained t = [] {
    synth::SynthSpec s;
    s.length = 1500;
    s.seed = 22;
    const auto frame = synth::generate(s).frame;
    Trained out;
    out.data = dataio::prepare(frame, 6, 1, {}, {});
    out.config.learning_rate = 0.2;
    out.config.batch_size = 128;
    out.config.max_epochs = 3;
    out.config.seed = 2;
    const auto spec = small_spec(6 * frame.features(), {8, 8, 4}, 1, 0.1);
    out.params = train::fit(nn::init_params(spec, 3), out.data.split, out.config).best;
    return out;
  }();
  return t;
}

}  // namespace

TEST_CASE("freeze masks") {
  nn::MlpSpec spec;
  spec.input_dim = 4;
  spec.output_dim = 1;
  const nn::ParamSet p(spec);
  const auto m = freeze(p, 4);
  CHECK(m.trainable_count() == 5);
  for (std::size_t l = 0; l < 9; ++l) CHECK(m.trainable(l) == (l >= 4));
  CHECK(freeze(p, 0).trainable_count() == 9);
  CHECK(freeze(p, 9).trainable_count() == 0);
  CHECK(error_kind_of([&] { freeze(p, 10); }) == ErrorKind::config);
}

TEST_CASE("freeze options json") {
  FreezeSpec s;
  s.frozen_prefix = 3;
  s.inherit_weighting = true;
  const auto back = FreezeSpec::from_json(s.to_json());
  CHECK(back.frozen_prefix == 3);
  CHECK(back.inherit_weighting);
  CHECK(FreezeSpec{}.max_epochs == 500);
  CHECK(error_kind_of([] { FreezeSpec::from_json({{"k", 1}}); }) == ErrorKind::config);
}

TEST_CASE("fine-tuning keeps the frozen prefix bit-identical") {
  const auto& t = trained();
  for (std::size_t k : {1, 2, 3}) {
    FreezeSpec s;
    s.frozen_prefix = k;
    s.max_epochs = 4;
    const auto r = finetune_run(t.params, t.data.split, s, t.config);
    const auto end = static_cast<Eigen::Index>(t.params.layer_range(k - 1).second);
    const auto after = r.best.flatten(), before = t.params.flatten();
    CHECK(after.head(end) == before.head(end));
    CHECK(after.tail(after.size() - end) != before.tail(before.size() - end));
  }
}

TEST_CASE("freezing every layer returns the input exactly") {
  const auto& t = trained();
  FreezeSpec s;
  s.frozen_prefix = t.params.layer_count();
  const auto r = finetune_run(t.params, t.data.split, s, t.config);
  CHECK(r.best == t.params);
  CHECK(r.report.best_epoch == 0);
}

TEST_CASE("fine-tuning never worsens the extreme evaluation loss") {
  const auto& t = trained();
  const auto eval = train::make_batch(t.data.split.eval_extreme);
  const double before = train::evaluation_loss(t.params, eval);
  for (std::size_t k : {0, 2}) {
    FreezeSpec s;
    s.frozen_prefix = k;
    s.max_epochs = 5;
    auto base = t.config;
    base.learning_rate = 5.0;  // deliberately harsh
    base.patience = 2;
    try {
      const auto r = finetune_run(t.params, t.data.split, s, base);
      CHECK(r.report.best_eval_loss <= before);
      CHECK(train::evaluation_loss(r.best, eval) <= before);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::divergence);
    }
  }
}

TEST_CASE("fine-tuning needs extreme training windows") {
  dataio::SplitResult split;
  split.train = pair_windows({0.1, 0.2, 0.3});
  split.validation = split.train;
  const auto p = nn::init_params(small_spec(1, {2}, 1), 1);
  CHECK(error_kind_of([&] { finetune_run(p, split, {}, {}); }) == ErrorKind::empty_subset);
}

TEST_CASE("sweep writes one row per k and selects by evaluation loss") {
  const auto& t = trained();
  FreezeSpec s;
  s.max_epochs = 2;
  const std::vector<std::size_t> ks{0, 1, 2, 3, 4};
  const auto sweep = finetune_sweep(t.params, t.data.split, t.data.normalizer, ks, s, t.config);
  REQUIRE(sweep.rows.size() == 5);
  std::size_t selected = 0;
  for (const auto& r : sweep.rows) {
    selected += r.selected ? 1 : 0;
    CHECK(r.eval_loss >= sweep.rows[sweep.selected_index].eval_loss);
  }
  CHECK(selected == 1);
  CHECK(sweep.rows[4].best_epoch == 0);  // k = layer count
  std::ostringstream out;
  write_sweep_csv(out, sweep);
  std::size_t lines = 0;
  for (char c : out.str()) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 6);
  CHECK(out.str().rfind("k,mae,rmse,eval_loss,best_epoch,selected\n", 0) == 0);
}
