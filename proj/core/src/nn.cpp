// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/nn.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "tailcast/diagnostics.hpp"

namespace tailcast::nn {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void check_trace(const ParamSet& params, const ForwardTrace& trace) {
  if (trace.params_fingerprint != params.fingerprint())
    fail(ErrorKind::consistency, "forward trace is stale: parameters changed since forward()");
}

void check_targets(const ParamSet& params, const ForwardTrace& trace, const Matrix& y) {
  if (static_cast<std::size_t>(y.rows()) != params.spec().output_dim ||
      static_cast<std::size_t>(y.cols()) != trace.batch_size())
    fail(ErrorKind::dimension, "target batch has shape " + std::to_string(y.rows()) + "x" +
                                   std::to_string(y.cols()) + ", expected " +
                                   std::to_string(params.spec().output_dim) + "x" +
                                   std::to_string(trace.batch_size()));
}

// Runs the dense stack. When `masks` is non-null its entries are applied as
// recorded; otherwise masks are drawn according to `mode` and stored.
void run_layers(const ParamSet& params, ForwardTrace& trace, const std::vector<Matrix>* masks,
                const ForwardMode& mode) {
  const auto& spec = params.spec();
  const std::size_t layers = spec.dense_layers();
  const auto n = trace.input.cols();
  const auto* train = std::get_if<TrainMode>(&mode);
  const bool draw = masks == nullptr && train != nullptr && spec.dropout_rate > 0.0;
  std::mt19937_64 rng(train ? train->seed : 0);
  const double keep_scale = 1.0 / (1.0 - spec.dropout_rate);

  trace.pre_activations.resize(layers);
  trace.activations.resize(layers);
  if (masks == nullptr) trace.dropout_masks.assign(layers - 1, Matrix());

  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& in = l == 0 ? trace.input : trace.activations[l - 1];
    Matrix z = params.weight(l) * in;
    z.colwise() += params.bias(l);
    Matrix a;
    if (l + 1 < layers) {
      a = z.cwiseMax(0.0);
      if (draw) {
        const auto width = z.rows();
        const auto cols = train->masking == DropoutMasking::shared ? 1 : n;
        Matrix m(width, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
          for (Eigen::Index r = 0; r < width; ++r)
            m(r, c) = unit_uniform(rng) < spec.dropout_rate ? 0.0 : keep_scale;
        trace.dropout_masks[l] = std::move(m);
      }
      const Matrix& m = masks ? (*masks)[l] : trace.dropout_masks[l];
      if (m.size() > 0) {
        if (m.cols() == 1 && n != 1)
          a.array().colwise() *= m.col(0).array();
        else
          a.array() *= m.array();
      }
    } else {
      a = z;
    }
    trace.pre_activations[l] = std::move(z);
    trace.activations[l] = std::move(a);
  }
}

// d loss_i / d z_l for every layer, one column per sample.
std::vector<Matrix> backprop_deltas(const ParamSet& params, const ForwardTrace& trace,
                                    const Matrix& y, std::span<const double> column_scale) {
  const std::size_t layers = params.layer_count();
  const double k = static_cast<double>(params.spec().output_dim);
  std::vector<Matrix> deltas(layers);
  Matrix d = (2.0 / k) * (trace.predictions() - y);
  if (!column_scale.empty()) {
    for (Eigen::Index c = 0; c < d.cols(); ++c) d.col(c) *= column_scale[static_cast<std::size_t>(c)];
  }
  deltas[layers - 1] = std::move(d);
  for (std::size_t l = layers - 1; l > 0; --l) {
    Matrix back = params.weight(l).transpose() * deltas[l];
    const Matrix& z = trace.pre_activations[l - 1];
    back.array() *= (z.array() > 0.0).cast<double>();
    const Matrix& m = trace.dropout_masks[l - 1];
    if (m.size() > 0) {
      if (m.cols() == 1 && back.cols() != 1)
        back.array().colwise() *= m.col(0).array();
      else
        back.array() *= m.array();
    }
    deltas[l - 1] = std::move(back);
  }
  return deltas;
}

const Matrix& layer_input(const ForwardTrace& trace, std::size_t layer) {
  return layer == 0 ? trace.input : trace.activations[layer - 1];
}

}  // namespace

std::size_t MlpSpec::layer_inputs(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_widths.at(layer - 1);
}

std::size_t MlpSpec::layer_outputs(std::size_t layer) const {
  return layer < hidden_widths.size() ? hidden_widths[layer] : output_dim;
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < dense_layers(); ++l)
    total += layer_outputs(l) * (layer_inputs(l) + 1);
  return total;
}

void MlpSpec::validate() const {
  if (input_dim < 1) fail(ErrorKind::config, "input_dim must be at least 1");
  if (output_dim < 1) fail(ErrorKind::config, "output_dim must be at least 1");
  for (auto w : hidden_widths)
    if (w < 1) fail(ErrorKind::config, "hidden widths must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    fail(ErrorKind::config, "dropout_rate must be in [0, 1)");
}

nlohmann::json MlpSpec::to_json() const {
  return {{"input_dim", input_dim},
          {"hidden_widths", hidden_widths},
          {"output_dim", output_dim},
          {"dropout_rate", dropout_rate}};
}

MlpSpec MlpSpec::from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  s.output_dim = j.at("output_dim").get<std::size_t>();
  s.dropout_rate = j.at("dropout_rate").get<double>();
  return s;
}

ParamSet::ParamSet(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec_.dense_layers(); ++l) {
    const auto in = spec_.layer_inputs(l);
    const auto out = spec_.layer_outputs(l);
    tensors_.push_back({"dense" + std::to_string(l) + ".weight", offset, out, in});
    offset += out * in;
    tensors_.push_back({"dense" + std::to_string(l) + ".bias", offset, out, 1});
    offset += out;
  }
  theta_ = Vector::Zero(static_cast<Eigen::Index>(offset));
}

Eigen::Map<const RowMatrix> ParamSet::weight(std::size_t layer) const {
  const auto& t = tensors_.at(2 * layer);
  return {theta_.data() + t.offset, static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)};
}

Eigen::Map<RowMatrix> ParamSet::weight(std::size_t layer) {
  const auto& t = tensors_.at(2 * layer);
  return {theta_.data() + t.offset, static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)};
}

Eigen::Map<const Vector> ParamSet::bias(std::size_t layer) const {
  const auto& t = tensors_.at(2 * layer + 1);
  return {theta_.data() + t.offset, static_cast<Eigen::Index>(t.rows)};
}

Eigen::Map<Vector> ParamSet::bias(std::size_t layer) {
  const auto& t = tensors_.at(2 * layer + 1);
  return {theta_.data() + t.offset, static_cast<Eigen::Index>(t.rows)};
}

std::pair<std::size_t, std::size_t> ParamSet::layer_range(std::size_t layer) const {
  const auto& w = tensors_.at(2 * layer);
  const auto& b = tensors_.at(2 * layer + 1);
  return {w.offset, b.offset + b.size()};
}

std::pair<std::size_t, std::size_t> ParamSet::weight_range(std::size_t layer) const {
  const auto& w = tensors_.at(2 * layer);
  return {w.offset, w.offset + w.size()};
}

ParamSet ParamSet::unflatten(const MlpSpec& spec, const Vector& theta) {
  ParamSet p(spec);
  if (theta.size() != p.theta_.size())
    fail(ErrorKind::dimension, "flat parameter vector has " + std::to_string(theta.size()) +
                                   " entries, model shape needs " + std::to_string(p.theta_.size()));
  p.theta_ = theta;
  return p;
}

std::uint64_t ParamSet::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(theta_.data());
  const auto count = static_cast<std::size_t>(theta_.size()) * sizeof(double);
  for (std::size_t i = 0; i < count; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

bool ParamSet::operator==(const ParamSet& other) const {
  return spec_ == other.spec_ && theta_.size() == other.theta_.size() &&
         std::memcmp(theta_.data(), other.theta_.data(),
                     static_cast<std::size_t>(theta_.size()) * sizeof(double)) == 0;
}

ParamSet init_params(const MlpSpec& spec, std::uint64_t seed) {
  ParamSet p(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < spec.dense_layers(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(spec.layer_inputs(l)));
    auto w = p.weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = (2.0 * unit_uniform(rng) - 1.0) * bound;
  }
  return p;
}

std::size_t TrainableMask::trainable_count() const {
  std::size_t n = 0;
  for (bool b : layers) n += b ? 1 : 0;
  return n;
}

ForwardTrace forward(const ParamSet& params, const Matrix& batch_x, const ForwardMode& mode) {
  if (static_cast<std::size_t>(batch_x.rows()) != params.spec().input_dim)
    fail(ErrorKind::dimension, "input batch has " + std::to_string(batch_x.rows()) +
                                   " rows, spec expects " + std::to_string(params.spec().input_dim));
  ForwardTrace trace;
  trace.input = batch_x;
  trace.params_fingerprint = params.fingerprint();
  run_layers(params, trace, nullptr, mode);
  return trace;
}

Matrix replay(const ParamSet& params, const ForwardTrace& trace) {
  ForwardTrace copy;
  copy.input = trace.input;
  run_layers(params, copy, &trace.dropout_masks, InferMode{});
  return copy.predictions();
}

Vector per_example_loss(const ForwardTrace& trace, const Matrix& batch_y) {
  const Matrix& yhat = trace.predictions();
  if (batch_y.rows() != yhat.rows() || batch_y.cols() != yhat.cols())
    fail(ErrorKind::dimension, "target batch shape does not match predictions");
  return (yhat - batch_y).array().square().colwise().sum().transpose() / static_cast<double>(yhat.rows());
}

std::vector<Vector> per_example_grads(const ParamSet& params, const ForwardTrace& trace,
                                      const Matrix& batch_y) {
  check_trace(params, trace);
  check_targets(params, trace, batch_y);
  const auto deltas = backprop_deltas(params, trace, batch_y, {});
  const auto n = static_cast<Eigen::Index>(trace.batch_size());
  std::vector<Vector> grads(static_cast<std::size_t>(n), Vector::Zero(static_cast<Eigen::Index>(params.size())));
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const Matrix& in = layer_input(trace, l);
    const auto [w0, w1] = params.weight_range(l);
    const auto rows = deltas[l].rows();
    const auto cols = in.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& g = grads[static_cast<std::size_t>(i)];
      Eigen::Map<RowMatrix>(g.data() + w0, rows, cols).noalias() = deltas[l].col(i) * in.col(i).transpose();
      g.segment(static_cast<Eigen::Index>(w1), rows) = deltas[l].col(i);
    }
  }
  return grads;
}

Vector weighted_gradient(const ParamSet& params, const ForwardTrace& trace, const Matrix& batch_y,
                         std::span<const double> coefficients) {
  check_trace(params, trace);
  check_targets(params, trace, batch_y);
  if (coefficients.size() != trace.batch_size())
    fail(ErrorKind::dimension, "coefficient count does not match batch size");
  const auto deltas = backprop_deltas(params, trace, batch_y, coefficients);
  Vector g(static_cast<Eigen::Index>(params.size()));
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const Matrix& in = layer_input(trace, l);
    const auto [w0, w1] = params.weight_range(l);
    Eigen::Map<RowMatrix>(g.data() + w0, deltas[l].rows(), in.rows()).noalias() =
        deltas[l] * in.transpose();
    g.segment(static_cast<Eigen::Index>(w1), deltas[l].rows()) = deltas[l].rowwise().sum();
  }
  return g;
}

Vector gradient_alignment(const ParamSet& params, const ForwardTrace& trace, const Matrix& batch_y,
                          const Vector& direction) {
  check_trace(params, trace);
  check_targets(params, trace, batch_y);
  if (static_cast<std::size_t>(direction.size()) != params.size())
    fail(ErrorKind::dimension, "direction length does not match parameter count");
  const auto deltas = backprop_deltas(params, trace, batch_y, {});
  Vector dots = Vector::Zero(static_cast<Eigen::Index>(trace.batch_size()));
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const Matrix& in = layer_input(trace, l);
    const auto [w0, w1] = params.weight_range(l);
    const auto rows = deltas[l].rows();
    Eigen::Map<const RowMatrix> dir_w(direction.data() + w0, rows, in.rows());
    const auto dir_b = direction.segment(static_cast<Eigen::Index>(w1), rows);
    const Matrix projected = dir_w * in;
    dots += (deltas[l].array() * projected.array()).colwise().sum().matrix().transpose();
    dots += (dir_b.transpose() * deltas[l]).transpose();
  }
  return dots;
}

Vector l2_penalty_grad(const ParamSet& params, double lambda, const TrainableMask& mask) {
  if (lambda < 0.0) fail(ErrorKind::config, "l2 coefficient must be non-negative");
  if (mask.layers.size() != params.layer_count())
    fail(ErrorKind::dimension, "trainable mask does not match layer count");
  Vector g = Vector::Zero(static_cast<Eigen::Index>(params.size()));
  if (lambda == 0.0) return g;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    if (!mask.trainable(l)) continue;
    const auto [w0, w1] = params.weight_range(l);
    const auto len = static_cast<Eigen::Index>(w1 - w0);
    g.segment(static_cast<Eigen::Index>(w0), len) =
        2.0 * lambda * params.flatten().segment(static_cast<Eigen::Index>(w0), len);
  }
  return g;
}

Matrix hidden_embeddings(const ParamSet& params, const Matrix& batch_x) {
  if (params.spec().hidden_widths.empty())
    fail(ErrorKind::config, "network has no hidden layer to embed from");
  const auto trace = forward(params, batch_x, InferMode{});
  return trace.activations[params.layer_count() - 2];
}

}  // namespace tailcast::nn
