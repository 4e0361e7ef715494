// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/cli/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tailcast/diagnostics.hpp"

namespace tailcast::cli {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::config, where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      fail(ErrorKind::config, "unknown key '" + key + "' in " + where);
}

dataio::ExtremeRule parse_extreme(const nlohmann::json& j) {
  dataio::ExtremeRule rule;
  auto parse_mode = [&](const std::string& text) {
    const auto colon = text.find(':');
    const std::string mode = text.substr(0, colon);
    if (mode == "target")
      rule.mode = dataio::ExtremeMode::target;
    else if (mode == "covariate")
      rule.mode = dataio::ExtremeMode::covariate;
    else
      fail(ErrorKind::config, "extreme mode must be 'target' or 'covariate', got '" + text + "'");
    if (colon != std::string::npos) rule.variable = text.substr(colon + 1);
  };
  if (j.is_string()) {
    parse_mode(j.get<std::string>());
    return rule;
  }
  reject_unknown(j, {"mode", "variable", "percentile"}, "extreme");
  if (j.contains("mode")) parse_mode(j["mode"].get<std::string>());
  if (j.contains("variable")) rule.variable = j["variable"].get<std::string>();
  if (j.contains("percentile")) rule.percentile = j["percentile"].get<double>();
  return rule;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void RunConfig::validate() const {
  if (!csv) synth.validate();
  if (csv && csv->empty()) fail(ErrorKind::config, "data.csv must be a non-empty path");
  if (alpha < 1 || beta < 1) fail(ErrorKind::config, "alpha and beta must be at least 1");
  if (!(extreme.percentile > 0.0 && extreme.percentile < 100.0))
    fail(ErrorKind::config, "extreme.percentile must be in (0, 100)");
  if (extreme.mode == dataio::ExtremeMode::covariate && extreme.variable.empty())
    fail(ErrorKind::config, "covariate extreme mode needs a variable name");
  const double total = splits.train + splits.validation + splits.test;
  if (!(splits.train > 0 && splits.validation > 0 && splits.test > 0) || std::abs(total - 1.0) > 1e-9)
    fail(ErrorKind::config, "split fractions must be positive and sum to 1");
  for (auto w : hidden_widths)
    if (w < 1) fail(ErrorKind::config, "model.hidden_widths entries must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorKind::config, "model.dropout_rate must be in [0, 1)");
  train.validate();

  const std::size_t layers = hidden_widths.size() + 1;
  if (!finetune.freeze_all && finetune.freeze.frozen_prefix > layers)
    fail(ErrorKind::config, "finetune.frozen_prefix exceeds the " + std::to_string(layers) + " dense layers");
  for (auto k : finetune.sweep)
    if (k > layers)
      fail(ErrorKind::config, "finetune.sweep entry " + std::to_string(k) + " exceeds the " +
                                  std::to_string(layers) + " dense layers");
  for (const auto* split : {&evaluate_split, &embeddings.split})
    if (*split != "train" && *split != "validation" && *split != "test")
      fail(ErrorKind::config, "split selector must be train, validation or test, got '" + *split + "'");
  if (seeds.empty()) fail(ErrorKind::config, "seeds must list at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    fail(ErrorKind::config, "seeds must be distinct");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json data;
  if (csv)
    data["csv"] = csv->generic_string();
  else
    data["synth"] = synth.to_json();
  nlohmann::json ft = finetune.freeze.to_json();
  if (finetune.freeze_all) ft["frozen_prefix"] = "all";
  ft["sweep"] = finetune.sweep;
  return {{"data", std::move(data)},
          {"schema",
           {{"timestamp_column", schema.timestamp_column}, {"features", schema.features}, {"targets", schema.targets}}},
          {"alpha", alpha},
          {"beta", beta},
          {"extreme",
           {{"mode", extreme.mode == dataio::ExtremeMode::target ? "target" : "covariate"},
            {"variable", extreme.variable},
            {"percentile", extreme.percentile}}},
          {"splits", {{"train", splits.train}, {"validation", splits.validation}, {"test", splits.test}}},
          {"model", {{"hidden_widths", hidden_widths}, {"dropout_rate", dropout_rate}}},
          {"train", train.to_json()},
          {"finetune", std::move(ft)},
          {"evaluate", {{"split", evaluate_split}}},
          {"embeddings",
           {{"extreme", embeddings.sample.extreme},
            {"normal", embeddings.sample.normal},
            {"seed", embeddings.sample.seed},
            {"split", embeddings.split}}},
          {"out", out.generic_string()},
          {"seeds", seeds}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  reject_unknown(j,
                 {"data", "schema", "alpha", "beta", "extreme", "splits", "model", "train", "finetune", "evaluate",
                  "embeddings", "out", "seeds"},
                 "config");
  try {
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"csv", "synth"}, "data");
      if (d.contains("csv") && d.contains("synth")) fail(ErrorKind::config, "data needs exactly one of csv, synth");
      if (d.contains("csv")) c.csv = std::filesystem::path(d["csv"].get<std::string>());
      if (d.contains("synth")) {
        reject_unknown(d["synth"],
                       {"length", "rho", "noise", "z0", "spike_prob", "spike_sigma", "spike_xi", "covariates", "lead",
                        "covariate_spikes", "seed", "start_hour"},
                       "data.synth");
        c.synth = synth::SynthSpec::from_json(d["synth"]);
      }
    }
    if (j.contains("schema")) {
      const auto& s = j["schema"];
      reject_unknown(s, {"timestamp_column", "features", "targets"}, "schema");
      if (s.contains("timestamp_column")) c.schema.timestamp_column = s["timestamp_column"].get<std::string>();
      if (s.contains("features")) c.schema.features = s["features"].get<std::vector<std::string>>();
      if (s.contains("targets")) c.schema.targets = s["targets"].get<std::vector<std::string>>();
    }
    if (j.contains("alpha")) c.alpha = j["alpha"].get<std::size_t>();
    if (j.contains("beta")) c.beta = j["beta"].get<std::size_t>();
    if (j.contains("extreme")) c.extreme = parse_extreme(j["extreme"]);
    if (j.contains("splits")) {
      const auto& s = j["splits"];
      reject_unknown(s, {"train", "validation", "test"}, "splits");
      c.splits.train = s.value("train", c.splits.train);
      c.splits.validation = s.value("validation", c.splits.validation);
      c.splits.test = s.value("test", c.splits.test);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      reject_unknown(m, {"hidden_widths", "dropout_rate"}, "model");
      if (m.contains("hidden_widths")) c.hidden_widths = m["hidden_widths"].get<std::vector<std::size_t>>();
      if (m.contains("dropout_rate")) c.dropout_rate = m["dropout_rate"].get<double>();
    }
    if (j.contains("train")) c.train = train::TrainConfig::from_json(j["train"]);
    if (j.contains("finetune")) {
      nlohmann::json ft = j["finetune"];
      reject_unknown(ft, {"frozen_prefix", "l2", "max_epochs", "inherit_weighting", "sweep"}, "finetune");
      if (ft.contains("sweep")) {
        c.finetune.sweep = ft["sweep"].get<std::vector<std::size_t>>();
        ft.erase("sweep");
      }
      if (ft.contains("frozen_prefix") && ft["frozen_prefix"].is_string()) {
        if (ft["frozen_prefix"].get<std::string>() != "all")
          fail(ErrorKind::config, "finetune.frozen_prefix must be a count or \"all\"");
        c.finetune.freeze_all = true;
        ft.erase("frozen_prefix");
      }
      c.finetune.freeze = finetune::FreezeSpec::from_json(ft);
    }
    if (j.contains("evaluate")) {
      reject_unknown(j["evaluate"], {"split"}, "evaluate");
      c.evaluate_split = j["evaluate"].value("split", c.evaluate_split);
    }
    if (j.contains("embeddings")) {
      const auto& e = j["embeddings"];
      reject_unknown(e, {"extreme", "normal", "seed", "split"}, "embeddings");
      c.embeddings.sample.extreme = e.value("extreme", c.embeddings.sample.extreme);
      c.embeddings.sample.normal = e.value("normal", c.embeddings.sample.normal);
      c.embeddings.sample.seed = e.value("seed", c.embeddings.sample.seed);
      c.embeddings.split = e.value("split", c.embeddings.split);
    }
    if (j.contains("out")) c.out = std::filesystem::path(j["out"].get<std::string>());
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("malformed config: ") + e.what());
  }
  if (!c.csv && c.schema.targets.empty()) c.schema.targets = {"target"};
  c.validate();
  return c;
}

nlohmann::json RunConfig::content_json() const {
  auto j = to_json();
  j.erase("out");
  return j;
}

std::string RunConfig::content_hash() const {
  const auto j = content_json();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    fail(ErrorKind::config, "override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) fail(ErrorKind::config, "override key '" + key + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) fail(ErrorKind::config, "override key '" + key + "' descends into a non-object");
      *node = nlohmann::json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides,
                          std::optional<std::uint64_t> seed, const std::optional<std::filesystem::path>& out) {
  nlohmann::json doc = nlohmann::json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) fail(ErrorKind::io, "cannot open config " + path->string());
    std::stringstream text;
    text << in.rdbuf();
    doc = nlohmann::json::parse(text.str(), nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::config, "config " + path->string() + " is not valid JSON");
    // Relative CSV paths are resolved against the config file's directory.
    if (doc.is_object() && doc.contains("data") && doc["data"].is_object() && doc["data"].contains("csv") &&
        doc["data"]["csv"].is_string()) {
      std::filesystem::path csv = doc["data"]["csv"].get<std::string>();
      if (csv.is_relative()) doc["data"]["csv"] = (path->parent_path() / csv).lexically_normal().generic_string();
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed) doc["seeds"] = {*seed};
  if (out) doc["out"] = out->generic_string();
  return RunConfig::from_json(doc);
}

}  // namespace tailcast::cli
