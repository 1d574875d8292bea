// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense feed-forward networks: evaluation, batch-mean losses and exact
// reverse-mode gradients over any subset of layers.

#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pwemoe/matrix.hpp"
#include "pwemoe/param_vector.hpp"

namespace pwemoe::nn {

enum class Activation { Relu, Identity, Softmax };

SegmentKind to_segment_kind(Activation a);
Activation to_activation(SegmentKind kind);

struct DenseLayer {
  std::string name;
  Matrix weight;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::Identity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  bool operator==(const DenseLayer&) const = default;
};

/// Chain of dense layers. Construction checks that dimensions chain and that
/// names are unique.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t input_dim() const;
  std::size_t output_dim() const;

  bool operator==(const MlpModel&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct ArchSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  Activation hidden = Activation::Relu;
  Activation output = Activation::Identity;
};

/// Layer names are "fc0", "fc1", ...
Layout mlp_layout(const ArchSpec& arch);

ParamVector flatten(const MlpModel& model);
/// Rebuilds the model from dense segments of `layout`; throws LayoutError on a
/// length mismatch or a non-dense segment.
MlpModel unflatten(std::span<const double> values, const Layout& layout);
MlpModel unflatten(const ParamVector& params);

Matrix forward(const MlpModel& model, const Matrix& inputs);

/// Inputs seen by each layer (entry i is the input of layer i) plus the final
/// output. Used by RegMean to build per-layer Gram matrices.
struct ForwardTrace {
  std::vector<Matrix> layer_inputs;
  Matrix output;
};
ForwardTrace forward_trace(const MlpModel& model, const Matrix& inputs);

enum class LossKind { Mse, SoftmaxCrossEntropy };

struct Batch {
  Matrix inputs;
  Matrix targets;
};

struct GradientReport {
  double loss = 0.0;
  ParamVector grad;
  std::set<std::string> selector;
};

/// Batch-mean loss and its exact gradient with respect to the selected layers.
/// Softmax cross-entropy reads the last layer's pre-activation as logits and
/// expects probability-vector targets (one-hot for classification).
GradientReport loss_and_grad(const MlpModel& model, const Batch& batch, LossKind loss_kind,
                             const std::set<std::string>& selector);

/// Loss only (no backward pass).
double loss(const MlpModel& model, const Batch& batch, LossKind loss_kind);

/// Every layer name of the model, for selecting the full parameter vector.
std::set<std::string> all_layers(const MlpModel& model);

}  // namespace pwemoe::nn
