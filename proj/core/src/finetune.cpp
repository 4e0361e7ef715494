// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/finetune.hpp"

#include <algorithm>
#include <ostream>

#include "tailcast/diagnostics.hpp"

namespace tailcast::finetune {

nlohmann::json FreezeSpec::to_json() const {
  return {{"frozen_prefix", frozen_prefix},
          {"l2", l2},
          {"max_epochs", max_epochs},
          {"inherit_weighting", inherit_weighting}};
}

FreezeSpec FreezeSpec::from_json(const nlohmann::json& j) { return from_json(j, FreezeSpec{}); }

FreezeSpec FreezeSpec::from_json(const nlohmann::json& j, FreezeSpec s) {
  if (!j.is_object()) fail(ErrorKind::config, "finetune config must be an object");
  for (const auto& [key, _] : j.items())
    if (key != "frozen_prefix" && key != "l2" && key != "max_epochs" && key != "inherit_weighting")
      fail(ErrorKind::config, "unknown finetune key '" + key + "'");
  try {
    if (j.contains("frozen_prefix")) s.frozen_prefix = j["frozen_prefix"].get<std::size_t>();
    if (j.contains("l2")) s.l2 = j["l2"].get<double>();
    if (j.contains("max_epochs")) s.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("inherit_weighting")) s.inherit_weighting = j["inherit_weighting"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("malformed finetune config: ") + e.what());
  }
  if (!(s.l2 >= 0.0)) fail(ErrorKind::config, "finetune l2 must be non-negative");
  if (s.max_epochs == 0) fail(ErrorKind::config, "finetune max_epochs must be positive");
  return s;
}

nn::TrainableMask freeze(const nn::ParamSet& params, std::size_t k) {
  const std::size_t layers = params.layer_count();
  if (k > layers)
    fail(ErrorKind::config, "cannot freeze " + std::to_string(k) + " layers of a " + std::to_string(layers) +
                                "-layer network");
  nn::TrainableMask mask = nn::TrainableMask::all(layers);
  for (std::size_t l = 0; l < k; ++l) mask.layers[l] = false;
  return mask;
}

train::FitResult finetune_run(const nn::ParamSet& params, const dataio::SplitResult& split, const FreezeSpec& spec,
                              const train::TrainConfig& base) {
  const auto mask = freeze(params, spec.frozen_prefix);
  if (train::subset_indices(split.train, train::TrainingSubset::extreme_only).empty())
    fail(ErrorKind::empty_subset, "no extreme training windows to fine-tune on");

  train::TrainConfig config = base;
  config.max_epochs = spec.max_epochs;
  config.l2 = spec.l2;
  config.training_subset = train::TrainingSubset::extreme_only;
  if (!spec.inherit_weighting) config.strategy = train::Strategy::unweighted;

  if (mask.trainable_count() == 0) {
    train::FitResult r{params, {}};
    r.report.strategy = config.strategy;
    r.report.best_epoch = 0;
    r.report.stopped_epoch = 0;
    const auto& monitor = split.eval_extreme.empty() ? split.validation : split.eval_extreme;
    if (!monitor.empty()) r.report.best_eval_loss = train::evaluation_loss(params, train::make_batch(monitor));
    return r;
  }

  train::FitOptions options;
  options.mask = mask;
  options.include_initial = true;
  return train::fit(params, split, config, options);
}

SweepResult finetune_sweep(const nn::ParamSet& params, const dataio::SplitResult& split,
                           const dataio::Normalizer& normalizer, std::span<const std::size_t> ks,
                           const FreezeSpec& spec, const train::TrainConfig& base) {
  if (ks.empty()) fail(ErrorKind::config, "freeze sweep needs at least one k");
  SweepResult out;
  double best = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    FreezeSpec s = spec;
    s.frozen_prefix = ks[i];
    auto run = finetune_run(params, split, s, base);
    const auto metrics = eval::score(run.best, split.test, normalizer, eval::Subset::extreme);
    out.rows.push_back({ks[i], metrics.mae, metrics.rmse, run.report.best_eval_loss, run.report.best_epoch, false});
    if (i == 0 || run.report.best_eval_loss < best) {
      best = run.report.best_eval_loss;
      out.selected_index = i;
      out.selected_params = std::move(run.best);
    }
  }
  out.rows[out.selected_index].selected = true;
  return out;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "k,mae,rmse,eval_loss,best_epoch,selected\n";
  const auto old = out.precision(17);
  for (const auto& r : sweep.rows)
    out << r.frozen_prefix << ',' << r.mae << ',' << r.rmse << ',' << r.eval_loss << ',' << r.best_epoch << ','
        << (r.selected ? 1 : 0) << '\n';
  out.precision(old);
}

}  // namespace tailcast::finetune
