// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace tailcast::nn {

/// Samples are stored one per column throughout: inputs are input_dim x n,
/// targets and predictions are output_dim x n.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths = {128, 128, 64, 64, 32, 32, 16, 16};
  std::size_t output_dim = 0;
  double dropout_rate = 0.1;

  /// Hidden layers plus the output layer.
  std::size_t dense_layers() const { return hidden_widths.size() + 1; }
  std::size_t layer_inputs(std::size_t layer) const;
  std::size_t layer_outputs(std::size_t layer) const;
  std::size_t parameter_count() const;

  void validate() const;
  bool operator==(const MlpSpec&) const = default;

  nlohmann::json to_json() const;
  static MlpSpec from_json(const nlohmann::json& j);
};

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;  // in elements
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

/// All weights and biases in one contiguous vector theta. Layer l occupies a
/// row-major weight block (out x in) followed by its bias.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t size() const { return static_cast<std::size_t>(theta_.size()); }
  std::size_t layer_count() const { return spec_.dense_layers(); }

  Eigen::Map<const RowMatrix> weight(std::size_t layer) const;
  Eigen::Map<RowMatrix> weight(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);

  /// Element range [begin, end) of layer l (weights then bias) within theta.
  std::pair<std::size_t, std::size_t> layer_range(std::size_t layer) const;
  /// Element range of just the weight block of layer l.
  std::pair<std::size_t, std::size_t> weight_range(std::size_t layer) const;

  const Vector& flatten() const { return theta_; }
  Vector& mutable_theta() { return theta_; }
  static ParamSet unflatten(const MlpSpec& spec, const Vector& theta);

  const std::vector<TensorInfo>& tensors() const { return tensors_; }

  /// Content hash of theta; used to detect stale forward traces.
  std::uint64_t fingerprint() const;

  bool operator==(const ParamSet& other) const;

 private:
  MlpSpec spec_;
  Vector theta_;
  std::vector<TensorInfo> tensors_;
};

/// Fan-in scaled uniform (He) weights, zero biases.
ParamSet init_params(const MlpSpec& spec, std::uint64_t seed);

/// Layers that take part in updates. Freezing is per dense layer.
struct TrainableMask {
  std::vector<bool> layers;

  static TrainableMask all(std::size_t layer_count) { return {std::vector<bool>(layer_count, true)}; }
  bool trainable(std::size_t layer) const { return layers.at(layer); }
  std::size_t trainable_count() const;
};

enum class DropoutMasking {
  per_sample,  // independent mask for every sample (ordinary training)
  shared,      // one mask per unit broadcast over the batch
};

struct InferMode {};
struct TrainMode {
  std::uint64_t seed = 0;
  DropoutMasking masking = DropoutMasking::per_sample;
};
using ForwardMode = std::variant<InferMode, TrainMode>;

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_activations;  // z_l for every dense layer
  std::vector<Matrix> activations;      // output of layer l after relu and dropout
  /// Per hidden layer: scaled keep mask (0 or 1/(1-p)). Empty when dropout is
  /// off. Shared masks have a single column.
  std::vector<Matrix> dropout_masks;
  std::uint64_t params_fingerprint = 0;

  const Matrix& predictions() const { return activations.back(); }
  std::size_t batch_size() const { return static_cast<std::size_t>(input.cols()); }
};

ForwardTrace forward(const ParamSet& params, const Matrix& batch_x, const ForwardMode& mode);

/// Recomputes predictions from a trace's input and recorded masks.
Matrix replay(const ParamSet& params, const ForwardTrace& trace);

/// Mean squared error per sample, averaged over the output dimension.
Vector per_example_loss(const ForwardTrace& trace, const Matrix& batch_y);

/// One full gradient vector per sample.
std::vector<Vector> per_example_grads(const ParamSet& params, const ForwardTrace& trace,
                                      const Matrix& batch_y);

/// sum_i coefficients[i] * grad(loss_i). With coefficients all 1/n this is the
/// gradient of the batch mean loss.
Vector weighted_gradient(const ParamSet& params, const ForwardTrace& trace, const Matrix& batch_y,
                         std::span<const double> coefficients);

/// <direction, grad(loss_i)> for every sample without materializing the
/// per-example gradients.
Vector gradient_alignment(const ParamSet& params, const ForwardTrace& trace, const Matrix& batch_y,
                          const Vector& direction);

/// 2*lambda*theta on trainable weight entries; biases and frozen layers get 0.
Vector l2_penalty_grad(const ParamSet& params, double lambda, const TrainableMask& mask);

/// Final hidden layer activations (inference mode), width x n.
Matrix hidden_embeddings(const ParamSet& params, const Matrix& batch_x);

}  // namespace tailcast::nn
