// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/cli/commands.hpp"

#include <fstream>
#include <sstream>

#include "tailcast/checkpoint.hpp"
#include "tailcast/diagnostics.hpp"
#include "tailcast/eval.hpp"
#include "tailcast/finetune.hpp"
#include "tailcast/reweight.hpp"
#include "tailcast/synth.hpp"

namespace tailcast::cli {

namespace fs = std::filesystem;

namespace {

fs::path make_run_dir(const RunConfig& config, const std::string& command, const std::string& extra = "") {
  std::string hash = config.content_hash();
  if (!extra.empty()) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(hash + "\n" + extra)));
    hash = buf;
  }
  const fs::path dir = config.out / (command + "-" + hash);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j, std::vector<fs::path>& artifacts) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
  artifacts.push_back(path);
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return std::to_string(fnv1a64(ss.str()));
}

nlohmann::json checkpoint_metadata(const RunConfig& config, const Experiment& ex, std::uint64_t seed,
                                   const std::string& stage) {
  return {{"stage", stage},
          {"config_hash", config.content_hash()},
          {"seed", seed},
          {"strategy", train::to_string(config.train.strategy)},
          {"alpha", config.alpha},
          {"beta", config.beta},
          {"threshold", ex.data.threshold},
          {"target_names", ex.target_names},
          {"normalizer", ex.data.normalizer.to_json()}};
}

// Loads a checkpoint and checks it was trained on data shaped like this run's.
nn::Checkpoint load_compatible(const fs::path& path, const Experiment& ex) {
  if (!fs::exists(path)) fail(ErrorKind::io, "checkpoint " + path.string() + " does not exist");
  auto ck = nn::load_checkpoint(path);
  if (!(ck.params.spec() == ex.model))
    fail(ErrorKind::consistency, "checkpoint model " + ck.params.spec().to_json().dump() +
                                     " does not match the configured model " + ex.model.to_json().dump());
  if (ck.metadata.contains("normalizer") && ck.metadata["normalizer"] != ex.data.normalizer.to_json())
    fail(ErrorKind::consistency, "checkpoint normalizer differs from the one fit on this run's training data");
  return ck;
}

nlohmann::json score_or_null(const nn::ParamSet& params, std::span<const dataio::WindowSample> windows,
                             const Experiment& ex, eval::Subset subset) {
  if (eval::select(windows, subset).empty()) {
    warn("no " + std::string(eval::to_string(subset)) + " windows in the scored split");
    return nullptr;
  }
  return eval::score(params, windows, ex.data.normalizer, subset, ex.target_names).to_json();
}

}  // namespace

dataio::TimeSeriesFrame load_frame(const RunConfig& config) {
  if (config.csv) return dataio::load_csv(*config.csv, config.schema);
  // Round-trip through CSV so column selection behaves exactly as for files.
  const auto generated = synth::generate(config.synth);
  std::stringstream buffer;
  dataio::write_csv(buffer, generated.frame);
  return dataio::read_csv(buffer, config.schema);
}

Experiment prepare_experiment(const RunConfig& config) {
  config.validate();
  Experiment ex;
  ex.frame = load_frame(config);
  if (config.extreme.mode == dataio::ExtremeMode::covariate) ex.frame.feature_index(config.extreme.variable);
  ex.data = dataio::prepare(ex.frame, config.alpha, config.beta, config.extreme, config.splits);
  for (auto t : ex.frame.target_indices) ex.target_names.push_back(ex.frame.feature_names[t]);

  ex.model.input_dim = config.alpha * ex.frame.features();
  ex.model.output_dim = config.beta * ex.frame.target_indices.size();
  ex.model.hidden_widths = config.hidden_widths;
  ex.model.dropout_rate = config.dropout_rate;
  ex.model.validate();

  const std::size_t rows = dataio::training_rows(ex.frame.rows(), config.splits.train);
  std::vector<double> reference(rows);
  const auto col = static_cast<Eigen::Index>(ex.frame.target_indices.front());
  for (std::size_t r = 0; r < rows; ++r) reference[r] = ex.frame.values(static_cast<Eigen::Index>(r), col);
  if (reference.empty()) fail(ErrorKind::empty_subset, "training segment has no rows");
  ex.evt_threshold = dataio::percentile(reference, config.extreme.percentile);
  return ex;
}

train::TrainConfig train_config_for(const RunConfig& config, const Experiment& ex, std::uint64_t seed) {
  train::TrainConfig c = config.train;
  c.seed = seed;
  if (!c.evt_threshold) c.evt_threshold = ex.evt_threshold;
  return c;
}

SeedRun train_seed(const RunConfig& config, const Experiment& ex, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  const auto init = nn::init_params(ex.model, seed);
  auto fitted = train::fit(init, ex.data.split, train_config_for(config, ex, seed));
  run.params = std::move(fitted.best);
  run.report = std::move(fitted.report);
  return run;
}

const std::vector<dataio::WindowSample>& split_by_name(const dataio::SplitResult& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "validation") return split.validation;
  if (name == "test") return split.test;
  fail(ErrorKind::config, "unknown split '" + name + "'");
}

CommandResult cmd_synth(const RunConfig& config) {
  if (config.csv) fail(ErrorKind::config, "synth needs a data.synth source, not data.csv");
  config.validate();
  const auto generated = synth::generate(config.synth);
  CommandResult r;
  r.run_dir = make_run_dir(config, "synth");
  const auto csv_path = r.run_dir / "synth.csv";
  {
    auto out = open_out(csv_path);
    dataio::write_csv(out, generated.frame);
  }
  r.artifacts.push_back(csv_path);
  write_json(r.run_dir / "spikes.json",
             {{"spec", config.synth.to_json()},
              {"spike_indices", generated.spike_indices},
              {"spike_magnitudes", generated.spike_magnitudes}},
             r.artifacts);
  r.summary = {{"command", "synth"},
               {"rows", generated.frame.rows()},
               {"features", generated.frame.feature_names},
               {"spikes", generated.spike_indices.size()},
               {"csv", csv_path.generic_string()}};
  return r;
}

CommandResult cmd_train(const RunConfig& config) {
  const auto ex = prepare_experiment(config);
  CommandResult r;
  r.run_dir = make_run_dir(config, "train");
  write_json(r.run_dir / "config.json", config.content_json(), r.artifacts);
  write_json(r.run_dir / "split_manifest.json", ex.data.split.manifest(), r.artifacts);
  write_json(r.run_dir / "normalizer.json", ex.data.normalizer.to_json(), r.artifacts);

  r.summary = {{"command", "train"}, {"strategy", train::to_string(config.train.strategy)}, {"runs", nlohmann::json::array()}};
  for (auto seed : config.seeds) {
    const fs::path dir = r.run_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    const auto tc = train_config_for(config, ex, seed);

    if (tc.strategy == train::Strategy::ipf || tc.strategy == train::Strategy::evt) {
      const auto keep = train::subset_indices(ex.data.split.train, tc.training_subset);
      std::vector<dataio::WindowSample> pool;
      std::vector<std::size_t> origins;
      for (auto i : keep) {
        pool.push_back(ex.data.split.train[i]);
        origins.push_back(ex.data.split.train[i].origin());
      }
      const auto sw = train::compute_static_weights(tc.strategy, pool, tc);
      auto out = open_out(dir / "weights.csv");
      reweight::write_weights_csv(out, origins, sw.weights);
      r.artifacts.push_back(dir / "weights.csv");
      if (sw.gpd) write_json(dir / "gpd.json", sw.gpd->to_json(), r.artifacts);
    }

    auto run = train_seed(config, ex, seed);
    auto meta = checkpoint_metadata(config, ex, seed, "train");
    meta["best_epoch"] = run.report.best_epoch;
    nn::save_checkpoint(dir / "model.json", run.params, meta);
    r.artifacts.push_back(dir / "model.json");
    r.artifacts.push_back(dir / "model.bin");
    run.report.best_checkpoint = "model.json";
    write_json(dir / "train_report.json", run.report.to_json(), r.artifacts);
    {
      auto out = open_out(dir / "weight_stats.csv");
      run.report.write_weight_stats_csv(out);
      r.artifacts.push_back(dir / "weight_stats.csv");
    }
    const auto& test = ex.data.split.test;
    const nlohmann::json metrics = {{"split", "test"},
                                    {"extreme", score_or_null(run.params, test, ex, eval::Subset::extreme)},
                                    {"all", score_or_null(run.params, test, ex, eval::Subset::all)}};
    write_json(dir / "metrics.json", metrics, r.artifacts);
    r.summary["runs"].push_back({{"seed", seed},
                                 {"best_epoch", run.report.best_epoch},
                                 {"stopped_epoch", run.report.stopped_epoch},
                                 {"best_eval_loss", run.report.best_eval_loss},
                                 {"checkpoint", (dir / "model.json").generic_string()},
                                 {"test_extreme", metrics["extreme"].is_null()
                                                      ? nlohmann::json(nullptr)
                                                      : nlohmann::json{{"mae", metrics["extreme"]["mae"]},
                                                                       {"rmse", metrics["extreme"]["rmse"]}}}});
  }
  r.summary["run_dir"] = r.run_dir.generic_string();
  return r;
}

CommandResult cmd_finetune(const RunConfig& config, const fs::path& checkpoint) {
  const auto ex = prepare_experiment(config);
  const auto ck = load_compatible(checkpoint, ex);
  const std::uint64_t seed = config.seeds.front();
  CommandResult r;
  r.run_dir = make_run_dir(config, "finetune", file_digest(checkpoint));
  auto tc = train_config_for(config, ex, seed);

  finetune::FreezeSpec spec = config.finetune.freeze;
  if (config.finetune.freeze_all) spec.frozen_prefix = ck.params.layer_count();

  nn::ParamSet result;
  auto meta = ck.metadata;
  meta["stage"] = "finetune";
  meta["finetune"] = spec.to_json();
  r.summary = {{"command", "finetune"}, {"source_checkpoint", checkpoint.generic_string()}};
  if (!config.finetune.sweep.empty()) {
    auto sweep = finetune::finetune_sweep(ck.params, ex.data.split, ex.data.normalizer, config.finetune.sweep, spec, tc);
    {
      auto out = open_out(r.run_dir / "sweep.csv");
      finetune::write_sweep_csv(out, sweep);
      r.artifacts.push_back(r.run_dir / "sweep.csv");
    }
    result = std::move(sweep.selected_params);
    const auto k = sweep.rows[sweep.selected_index].frozen_prefix;
    meta["finetune"]["frozen_prefix"] = k;
    r.summary["sweep_rows"] = sweep.rows.size();
    r.summary["selected_frozen_prefix"] = k;
  } else {
    auto run = finetune::finetune_run(ck.params, ex.data.split, spec, tc);
    result = std::move(run.best);
    write_json(r.run_dir / "finetune_report.json", run.report.to_json(), r.artifacts);
    r.summary["best_epoch"] = run.report.best_epoch;
    r.summary["best_eval_loss"] = run.report.best_eval_loss;
  }
  nn::save_checkpoint(r.run_dir / "finetuned.json", result, meta);
  r.artifacts.push_back(r.run_dir / "finetuned.json");
  r.artifacts.push_back(r.run_dir / "finetuned.bin");
  r.summary["checkpoint"] = (r.run_dir / "finetuned.json").generic_string();
  r.summary["run_dir"] = r.run_dir.generic_string();
  return r;
}

CommandResult cmd_evaluate(const RunConfig& config, const fs::path& checkpoint) {
  const auto ex = prepare_experiment(config);
  const auto ck = load_compatible(checkpoint, ex);
  const auto& windows = split_by_name(ex.data.split, config.evaluate_split);
  if (windows.empty()) fail(ErrorKind::empty_subset, "split '" + config.evaluate_split + "' has no windows");
  CommandResult r;
  r.run_dir = make_run_dir(config, "evaluate", file_digest(checkpoint));
  const nlohmann::json metrics = {{"split", config.evaluate_split},
                                  {"extreme", score_or_null(ck.params, windows, ex, eval::Subset::extreme)},
                                  {"normal", score_or_null(ck.params, windows, ex, eval::Subset::normal)},
                                  {"all", score_or_null(ck.params, windows, ex, eval::Subset::all)}};
  write_json(r.run_dir / "metrics.json", metrics, r.artifacts);
  r.summary = {{"command", "evaluate"}, {"metrics", (r.run_dir / "metrics.json").generic_string()}};
  for (const char* s : {"extreme", "normal", "all"})
    if (!metrics[s].is_null()) r.summary[s] = {{"mae", metrics[s]["mae"]}, {"rmse", metrics[s]["rmse"]}};
  r.summary["run_dir"] = r.run_dir.generic_string();
  return r;
}

CommandResult cmd_export_embeddings(const RunConfig& config, const fs::path& checkpoint) {
  const auto ex = prepare_experiment(config);
  const auto ck = load_compatible(checkpoint, ex);
  const auto& windows = split_by_name(ex.data.split, config.embeddings.split);
  CommandResult r;
  r.run_dir = make_run_dir(config, "embeddings", file_digest(checkpoint));
  const auto path = r.run_dir / "embeddings.csv";
  std::size_t rows = 0;
  {
    auto out = open_out(path);
    rows = eval::export_embeddings(out, ck.params, windows, config.embeddings.sample);
  }
  r.artifacts.push_back(path);
  r.summary = {{"command", "export-embeddings"}, {"rows", rows}, {"csv", path.generic_string()},
               {"run_dir", r.run_dir.generic_string()}};
  return r;
}

}  // namespace tailcast::cli
