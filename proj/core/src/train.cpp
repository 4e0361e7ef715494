// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "tailcast/diagnostics.hpp"

namespace tailcast::train {

namespace {

template <typename E>
struct EnumName {
  E value;
  std::string_view name;
};

constexpr EnumName<Strategy> kStrategies[] = {
    {Strategy::unweighted, "unweighted"}, {Strategy::ipf, "ipf"}, {Strategy::evt, "evt"}, {Strategy::meta, "meta"}};
constexpr EnumName<TrainingSubset> kSubsets[] = {{TrainingSubset::both, "both"},
                                                 {TrainingSubset::normal_only, "normal_only"},
                                                 {TrainingSubset::extreme_only, "extreme_only"}};
constexpr EnumName<MetaStepScale> kScales[] = {{MetaStepScale::batch_sum, "batch_sum"},
                                               {MetaStepScale::batch_mean, "batch_mean"}};

template <typename E, std::size_t N>
std::string_view name_of(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <typename E, std::size_t N>
E parse_enum(const EnumName<E> (&table)[N], std::string_view s, std::string_view what) {
  for (const auto& e : table)
    if (e.name == s) return e.value;
  std::string options;
  for (const auto& e : table) options += (options.empty() ? "" : ", ") + std::string(e.name);
  fail(ErrorKind::config, "unknown " + std::string(what) + " '" + std::string(s) + "' (expected one of " +
                              options + ")");
}

// Fisher-Yates with an explicit generator so the order does not depend on the
// standard library's shuffle.
void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<std::size_t> sample_eval_indices(std::size_t available, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  if (m > available) {
    out.resize(m);
    for (auto& v : out) v = static_cast<std::size_t>(rng() % available);
    return out;
  }
  out.resize(available);
  std::iota(out.begin(), out.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (available - i));
    std::swap(out[i], out[j]);
  }
  out.resize(m);
  return out;
}

double mean_of(const nn::Vector& v) { return v.size() == 0 ? 0.0 : v.mean(); }

void check_finite_loss(double loss, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    fail(ErrorKind::divergence, "non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch));
}

std::string batch_tag(std::size_t epoch, std::size_t batch) {
  return "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
}

}  // namespace

std::string_view to_string(Strategy s) { return name_of(kStrategies, s); }
std::string_view to_string(TrainingSubset s) { return name_of(kSubsets, s); }
std::string_view to_string(MetaStepScale s) { return name_of(kScales, s); }
Strategy parse_strategy(std::string_view s) { return parse_enum(kStrategies, s, "strategy"); }
TrainingSubset parse_subset(std::string_view s) { return parse_enum(kSubsets, s, "training subset"); }
MetaStepScale parse_meta_step_scale(std::string_view s) { return parse_enum(kScales, s, "meta step scale"); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    fail(ErrorKind::config, "learning_rate must be positive");
  if (batch_size == 0) fail(ErrorKind::config, "batch_size must be positive");
  if (eval_batch_size == 0) fail(ErrorKind::config, "eval_batch_size must be positive");
  if (max_epochs == 0) fail(ErrorKind::config, "max_epochs must be positive");
  if (patience == 0) fail(ErrorKind::config, "patience must be positive");
  if (!(l2 >= 0.0)) fail(ErrorKind::config, "l2 must be non-negative");
  if (ipf_bins < 2) fail(ErrorKind::config, "ipf_bins must be at least 2");
  if (!(evt_normal_weight > 0.0)) fail(ErrorKind::config, "evt_normal_weight must be positive");
  if (!(evt_percentile > 0.0 && evt_percentile < 100.0))
    fail(ErrorKind::config, "evt_percentile must be in (0, 100)");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"strategy", to_string(strategy)},
                      {"learning_rate", learning_rate},
                      {"batch_size", batch_size},
                      {"eval_batch_size", eval_batch_size},
                      {"max_epochs", max_epochs},
                      {"patience", patience},
                      {"l2", l2},
                      {"seed", seed},
                      {"training_subset", to_string(training_subset)},
                      {"meta_step_scale", to_string(meta_step_scale)},
                      {"ipf_bins", ipf_bins},
                      {"evt_normal_weight", evt_normal_weight},
                      {"evt_percentile", evt_percentile}};
  j["evt_threshold"] = evt_threshold ? nlohmann::json(*evt_threshold) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) fail(ErrorKind::config, "training config must be an object");
  static const char* const known[] = {"strategy",        "learning_rate",     "batch_size",     "eval_batch_size",
                                      "max_epochs",      "patience",          "l2",             "seed",
                                      "training_subset", "meta_step_scale",   "ipf_bins",       "evt_normal_weight",
                                      "evt_percentile",  "evt_threshold"};
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      fail(ErrorKind::config, "unknown training key '" + key + "'");
  try {
    if (j.contains("strategy")) c.strategy = parse_strategy(j["strategy"].get<std::string>());
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("eval_batch_size")) c.eval_batch_size = j["eval_batch_size"].get<std::size_t>();
    if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("patience")) c.patience = j["patience"].get<std::size_t>();
    if (j.contains("l2")) c.l2 = j["l2"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("training_subset")) c.training_subset = parse_subset(j["training_subset"].get<std::string>());
    if (j.contains("meta_step_scale"))
      c.meta_step_scale = parse_meta_step_scale(j["meta_step_scale"].get<std::string>());
    if (j.contains("ipf_bins")) c.ipf_bins = j["ipf_bins"].get<std::size_t>();
    if (j.contains("evt_normal_weight")) c.evt_normal_weight = j["evt_normal_weight"].get<double>();
    if (j.contains("evt_percentile")) c.evt_percentile = j["evt_percentile"].get<double>();
    if (j.contains("evt_threshold")) {
      if (j["evt_threshold"].is_null())
        c.evt_threshold.reset();
      else
        c.evt_threshold = j["evt_threshold"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

SampleBatch make_batch(std::span<const dataio::WindowSample> windows, std::span<const std::size_t> indices) {
  if (windows.empty() || indices.empty()) fail(ErrorKind::empty_subset, "cannot build an empty batch");
  const auto in = static_cast<Eigen::Index>(windows[indices[0]].input_size());
  const auto out = static_cast<Eigen::Index>(windows[indices[0]].output_size());
  SampleBatch b;
  b.x.resize(in, static_cast<Eigen::Index>(indices.size()));
  b.y.resize(out, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const auto& w = windows[indices[c]];
    const auto col = static_cast<Eigen::Index>(c);
    w.copy_x(b.x.col(col));
    w.copy_y(b.y.col(col));
  }
  return b;
}

SampleBatch make_batch(std::span<const dataio::WindowSample> windows) {
  std::vector<std::size_t> all(windows.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_batch(windows, all);
}

BatchWeightStats summarize_weights(std::span<const double> weights, std::size_t epoch, std::size_t batch) {
  BatchWeightStats s;
  s.epoch = epoch;
  s.batch = batch;
  if (weights.empty()) return s;
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  s.min = *lo;
  s.max = *hi;
  s.sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  s.mean = s.sum / static_cast<double>(weights.size());
  s.zero_fraction = static_cast<double>(std::count(weights.begin(), weights.end(), 0.0)) /
                    static_cast<double>(weights.size());
  return s;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs)
    epochs_json.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"eval_loss", e.eval_loss}});
  nlohmann::json summary = nullptr;
  if (!weight_stats.empty()) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, zero = 0.0, mean = 0.0;
    for (const auto& s : weight_stats) {
      lo = std::min(lo, s.min);
      hi = std::max(hi, s.max);
      zero += s.zero_fraction;
      mean += s.mean;
    }
    const double n = static_cast<double>(weight_stats.size());
    summary = {{"batches", weight_stats.size()},
               {"min", lo},
               {"max", hi},
               {"mean_of_batch_means", mean / n},
               {"mean_zero_fraction", zero / n}};
  }
  return {{"strategy", to_string(strategy)},
          {"epochs", std::move(epochs_json)},
          {"stopped_epoch", stopped_epoch},
          {"best_epoch", best_epoch},
          {"best_eval_loss", best_eval_loss},
          {"best_checkpoint", best_checkpoint},
          {"monitor", monitor},
          {"dropout_mask_policy", dropout_mask_policy},
          {"weight_summary", std::move(summary)}};
}

void TrainReport::write_weight_stats_csv(std::ostream& out) const {
  out << "epoch,batch,min,mean,max,zero_fraction,sum\n";
  out.precision(17);
  for (const auto& s : weight_stats)
    out << s.epoch << ',' << s.batch << ',' << s.min << ',' << s.mean << ',' << s.max << ',' << s.zero_fraction
        << ',' << s.sum << '\n';
}

// ---------------------------------------------------------------------------

void sgd_update(nn::ParamSet& params, const nn::Vector& gradient, double learning_rate,
                const nn::TrainableMask& mask, std::string_view where) {
  if (static_cast<std::size_t>(gradient.size()) != params.size())
    fail(ErrorKind::dimension, "gradient length " + std::to_string(gradient.size()) + " does not match " +
                                   std::to_string(params.size()) + " parameters");
  if (mask.layers.size() != params.layer_count())
    fail(ErrorKind::dimension, "trainable mask covers " + std::to_string(mask.layers.size()) + " layers, model has " +
                                   std::to_string(params.layer_count()));
  if (!gradient.allFinite())
    fail(ErrorKind::divergence,
         "non-finite gradient" + (where.empty() ? std::string() : " at " + std::string(where)));
  auto& theta = params.mutable_theta();
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    if (!mask.trainable(l)) continue;
    const auto [b, e] = params.layer_range(l);
    const auto len = static_cast<Eigen::Index>(e - b);
    theta.segment(static_cast<Eigen::Index>(b), len) -=
        learning_rate * gradient.segment(static_cast<Eigen::Index>(b), len);
  }
}

nn::ParamSet sgd_step(const nn::ParamSet& params, const nn::Vector& gradient, double learning_rate,
                      const nn::TrainableMask& mask, std::string_view where) {
  nn::ParamSet next = params;
  sgd_update(next, gradient, learning_rate, mask, where);
  return next;
}

double evaluation_loss(const nn::ParamSet& params, const SampleBatch& batch) {
  const auto trace = nn::forward(params, batch.x, nn::InferMode{});
  return mean_of(nn::per_example_loss(trace, batch.y));
}

StaticWeights compute_static_weights(Strategy strategy, std::span<const dataio::WindowSample> train,
                                     const TrainConfig& config) {
  StaticWeights out;
  std::vector<double> peaks;
  peaks.reserve(train.size());
  for (const auto& w : train) peaks.push_back(w.target_peak());

  switch (strategy) {
    case Strategy::unweighted:
    case Strategy::meta:
      out.weights.values.assign(train.size(), 1.0);
      out.weights.scheme = reweight::WeightScheme::uniform;
      break;
    case Strategy::ipf: {
      auto r = reweight::ipf_weights(peaks, config.ipf_bins);
      out.weights = std::move(r.weights);
      out.histogram = std::move(r.histogram);
      break;
    }
    case Strategy::evt: {
      if (peaks.empty()) fail(ErrorKind::empty_subset, "no training windows for the EVT fit");
      const double mu = config.evt_threshold ? *config.evt_threshold
                                             : dataio::percentile(peaks, config.evt_percentile);
      out.gpd = reweight::fit_gpd_above(peaks, mu);
      out.weights = reweight::evt_weights(peaks, *out.gpd, config.evt_normal_weight);
      break;
    }
  }
  return out;
}

EpochResult weighted_epoch(const nn::ParamSet& params, std::span<const dataio::WindowSample> train,
                           std::span<const double> weights, const TrainConfig& config, std::size_t epoch,
                           const nn::TrainableMask& mask, std::vector<BatchWeightStats>* audit) {
  if (train.empty()) fail(ErrorKind::empty_subset, "no training windows");
  if (weights.size() != train.size())
    fail(ErrorKind::dimension, "weight count " + std::to_string(weights.size()) + " differs from " +
                                   std::to_string(train.size()) + " training windows");

  EpochResult r{params, 0.0};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_indices(order, mix_seed(config.seed, epoch, 0x5348u));

  double loss_total = 0.0;
  std::vector<double> coeff;
  std::vector<double> batch_weights;
  std::size_t batch = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch) {
    const std::size_t stop = std::min(order.size(), start + config.batch_size);
    const std::span<const std::size_t> idx(order.data() + start, stop - start);
    const auto b = make_batch(train, idx);
    const nn::TrainMode mode{mix_seed(config.seed, epoch, batch + 1), nn::DropoutMasking::per_sample};
    const auto trace = nn::forward(r.params, b.x, mode);
    const nn::Vector losses = nn::per_example_loss(trace, b.y);

    const double n = static_cast<double>(idx.size());
    coeff.resize(idx.size());
    batch_weights.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      batch_weights[i] = weights[idx[i]];
      coeff[i] = batch_weights[i] / n;
    }
    loss_total += losses.sum();
    check_finite_loss(loss_total, epoch, batch);
    nn::Vector grad = nn::weighted_gradient(r.params, trace, b.y, coeff);
    if (config.l2 > 0.0) grad += nn::l2_penalty_grad(r.params, config.l2, mask);
    sgd_update(r.params, grad, config.learning_rate, mask, batch_tag(epoch, batch));
    if (audit) audit->push_back(summarize_weights(batch_weights, epoch, batch));
  }
  r.loss = loss_total / static_cast<double>(train.size());
  return r;
}

MetaStepResult meta_train_step(const nn::ParamSet& params, const SampleBatch& train, const SampleBatch& eval,
                               const TrainConfig& config, std::uint64_t dropout_seed,
                               const nn::TrainableMask& mask) {
  if (train.size() == 0 || eval.size() == 0) fail(ErrorKind::empty_subset, "meta step needs non-empty batches");
  const nn::TrainMode mode{dropout_seed, nn::DropoutMasking::shared};
  const auto train_trace = nn::forward(params, train.x, mode);
  const auto eval_trace = nn::forward(params, eval.x, mode);

  const std::vector<double> eval_coeff(eval.size(), 1.0 / static_cast<double>(eval.size()));
  if (!train_trace.predictions().allFinite() || !eval_trace.predictions().allFinite())
    fail(ErrorKind::divergence, "non-finite predictions in meta step");
  const nn::Vector eval_grad = nn::weighted_gradient(params, eval_trace, eval.y, eval_coeff);
  if (!eval_grad.allFinite()) fail(ErrorKind::divergence, "non-finite evaluation gradient in meta step");
  const nn::Vector align = nn::gradient_alignment(params, train_trace, train.y, eval_grad);
  if (!align.allFinite()) fail(ErrorKind::divergence, "non-finite gradient alignment in meta step");

  MetaStepResult r;
  r.weights = reweight::meta_weights_from_alignment(std::span<const double>(align.data(), align.size()));
  const double scale =
      config.meta_step_scale == MetaStepScale::batch_mean ? 1.0 / static_cast<double>(train.size()) : 1.0;
  std::vector<double> coeff(r.weights.values);
  for (auto& c : coeff) c *= scale;

  nn::Vector grad = nn::weighted_gradient(params, train_trace, train.y, coeff);
  if (config.l2 > 0.0) grad += nn::l2_penalty_grad(params, config.l2, mask);
  r.train_loss = mean_of(nn::per_example_loss(train_trace, train.y));
  r.eval_loss = mean_of(nn::per_example_loss(eval_trace, eval.y));
  r.params = sgd_step(params, grad, config.learning_rate, mask, "meta step");
  return r;
}

EpochResult meta_epoch(const nn::ParamSet& params, std::span<const dataio::WindowSample> train,
                       std::span<const dataio::WindowSample> eval, const TrainConfig& config, std::size_t epoch,
                       const nn::TrainableMask& mask, std::vector<BatchWeightStats>* audit) {
  if (train.empty()) fail(ErrorKind::empty_subset, "no training windows");
  if (eval.empty())
    fail(ErrorKind::strategy_unavailable, "meta strategy needs a non-empty extreme evaluation set");

  EpochResult r{params, 0.0};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_indices(order, mix_seed(config.seed, epoch, 0x5348u));

  double loss_total = 0.0;
  std::size_t batch = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch) {
    const std::size_t stop = std::min(order.size(), start + config.batch_size);
    const auto tb = make_batch(train, std::span<const std::size_t>(order.data() + start, stop - start));
    const auto eidx = sample_eval_indices(eval.size(), config.eval_batch_size,
                                          mix_seed(config.seed, epoch, 0x45560000u + batch));
    const auto eb = make_batch(eval, eidx);
    auto step = meta_train_step(r.params, tb, eb, config, mix_seed(config.seed, epoch, batch + 1), mask);
    r.params = std::move(step.params);
    loss_total += step.train_loss * static_cast<double>(tb.size());
    check_finite_loss(loss_total, epoch, batch);
    if (audit) audit->push_back(summarize_weights(step.weights.values, epoch, batch));
  }
  r.loss = loss_total / static_cast<double>(train.size());
  return r;
}

std::vector<std::size_t> subset_indices(std::span<const dataio::WindowSample> pool, TrainingSubset subset) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const bool ext = pool[i].extreme();
    if (subset == TrainingSubset::both || (subset == TrainingSubset::extreme_only) == ext) out.push_back(i);
  }
  return out;
}

FitResult fit(const nn::ParamSet& initial, const dataio::SplitResult& split, const TrainConfig& config,
              const FitOptions& options) {
  config.validate();
  const auto mask = options.mask.value_or(nn::TrainableMask::all(initial.layer_count()));
  if (mask.layers.size() != initial.layer_count())
    fail(ErrorKind::dimension, "trainable mask does not match the model depth");

  const auto keep = subset_indices(split.train, config.training_subset);
  if (keep.empty())
    fail(ErrorKind::empty_subset,
         "training subset '" + std::string(to_string(config.training_subset)) + "' selects no windows");
  std::vector<dataio::WindowSample> pool;
  pool.reserve(keep.size());
  for (auto i : keep) pool.push_back(split.train[i]);

  std::vector<double> weights;
  if (options.static_weights) {
    if (options.static_weights->size() != split.train.size())
      fail(ErrorKind::dimension, "static weights are not aligned with the training split");
    for (auto i : keep) weights.push_back(options.static_weights->values[i]);
  } else {
    weights = compute_static_weights(config.strategy, pool, config).weights.values;
  }

  const bool meta = config.strategy == Strategy::meta;
  if (meta && split.eval_extreme.empty())
    fail(ErrorKind::strategy_unavailable, "meta strategy needs a non-empty extreme evaluation set");

  TrainReport report;
  report.strategy = config.strategy;
  report.dropout_mask_policy = meta ? "shared" : "per_sample";
  const std::vector<dataio::WindowSample>* monitor = &split.eval_extreme;
  if (monitor->empty()) {
    if (split.validation.empty())
      fail(ErrorKind::empty_subset, "no evaluation windows for early stopping");
    warn("extreme evaluation set is empty; early stopping monitors the full validation split");
    monitor = &split.validation;
    report.monitor = "validation";
  }
  const auto monitor_batch = make_batch(*monitor);

  FitResult out{initial, {}};
  nn::ParamSet current = initial;
  double best = std::numeric_limits<double>::infinity();
  if (options.include_initial) {
    best = evaluation_loss(initial, monitor_batch);
    report.best_epoch = 0;
  }
  std::size_t since = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochResult er = meta ? meta_epoch(current, pool, split.eval_extreme, config, epoch, mask, &report.weight_stats)
                          : weighted_epoch(current, pool, weights, config, epoch, mask, &report.weight_stats);
    current = std::move(er.params);
    const double eval_loss = evaluation_loss(current, monitor_batch);
    if (!std::isfinite(eval_loss))
      fail(ErrorKind::divergence, "non-finite evaluation loss at epoch " + std::to_string(epoch));
    report.epochs.push_back({epoch, er.loss, eval_loss});
    report.stopped_epoch = epoch;
    if (eval_loss < best) {
      best = eval_loss;
      report.best_epoch = epoch;
      out.best = current;
      since = 0;
    } else if (++since >= config.patience) {
      break;
    }
  }
  report.best_eval_loss = best;
  out.report = std::move(report);
  return out;
}

}  // namespace tailcast::train
