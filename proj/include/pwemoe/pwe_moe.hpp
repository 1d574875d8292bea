// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Preference-conditioned weight-ensembling MoE layers.
//
// Each up-scaled layer keeps the pre-trained segment phi_0 and the dictionary
// of task vectors D fixed, and owns a small router R mapping a preference r to
// routing weights w. The layer's parameters at r are phi* = D w + phi_0.
// Layers that are not up-scaled are merged once by task arithmetic.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwemoe/matrix.hpp"
#include "pwemoe/merge.hpp"
#include "pwemoe/nn.hpp"
#include "pwemoe/param_vector.hpp"

namespace pwemoe::moe {

inline constexpr double kRouterInitStddev = 0.01;

/// R(r) = W2 ReLU(W1 r + b1) + b2 with hidden width 2T.
struct Router {
  Matrix w1;  // 2T x T
  std::vector<double> b1;
  Matrix w2;  // T x 2T
  std::vector<double> b2;

  std::size_t task_count() const { return w2.rows(); }
  std::size_t hidden_width() const { return w1.rows(); }
  /// 4T^2 + 3T.
  std::size_t parameter_count() const;

  /// W1, b1, W2, b2 concatenated (row-major matrices).
  std::vector<double> flat() const;
  void assign(std::span<const double> flat);

  bool operator==(const Router&) const = default;
};

std::size_t router_parameter_count(std::size_t task_count);

/// W1, W2 ~ N(0, stddev^2) from a generator seeded with `seed`; b1 = 0; b2 = lambda.
Router init_router(std::size_t task_count, double lambda, std::uint64_t seed,
                   double stddev = kRouterInitStddev);

/// Routing weights for preference r. Throws DomainError when r is off the simplex.
std::vector<double> route(const Router& router, std::span<const double> r);

/// Gradient of a scalar loss with respect to the router parameters (same
/// packing as Router::flat) given dL/dw at preference r.
std::vector<double> route_backward(const Router& router, std::span<const double> r,
                                   std::span<const double> grad_w);

struct PweMoeLayer {
  std::string name;
  merge::TaskVectorDictionary dictionary;  // dictionary.base() is phi_0 for this layer
  Router router;

  std::size_t task_count() const { return dictionary.task_count(); }
  bool operator==(const PweMoeLayer&) const = default;
};

/// phi_0 + D w.
std::vector<double> decode(const PweMoeLayer& layer, std::span<const double> w);

/// Selects which layers become MoE layers.
struct UpscaleStrategy {
  std::string name;
  std::function<bool(std::size_t index, const std::string& layer_name)> select;

  /// Every layer.
  static UpscaleStrategy all_layers();
  /// Layers at zero-based index 1, 3, 5, ...
  static UpscaleStrategy odd_layers_only();
  /// Exactly the named layers.
  static UpscaleStrategy named(std::vector<std::string> names);
  /// Preset by name ("all-layers" or "odd-layers-only").
  static UpscaleStrategy preset(std::string_view name);
};

class UpscaledModel {
 public:
  UpscaledModel() = default;
  UpscaledModel(Layout layout, std::vector<PweMoeLayer> moe_layers, ParamVector static_params,
                double lambda);

  const Layout& layout() const { return layout_; }
  std::size_t task_count() const;
  double lambda() const { return lambda_; }

  /// MoE layers in layout order.
  const std::vector<PweMoeLayer>& moe_layers() const { return moe_layers_; }
  std::vector<PweMoeLayer>& moe_layers() { return moe_layers_; }
  const PweMoeLayer* find_moe_layer(std::string_view name) const;
  std::vector<std::string> moe_layer_names() const;

  /// Task-arithmetic merge of every non-up-scaled layer.
  const ParamVector& static_params() const { return static_params_; }

  /// Sum of router parameter counts.
  std::size_t trainable_parameter_count() const;

  /// Checksum over phi_0, dictionaries and static parameters (everything the
  /// router trainer must leave untouched).
  std::uint64_t frozen_checksum() const;

  bool operator==(const UpscaledModel&) const = default;

 private:
  Layout layout_;
  std::vector<PweMoeLayer> moe_layers_;
  ParamVector static_params_;
  double lambda_ = 0.0;
};

/// Up-scales the selected layers with fresh routers (router for MoE layer k is
/// seeded with derive_seed(seed, k)) and merges the rest by task arithmetic.
UpscaledModel upscale(const ParamVector& pretrained, std::span<const ParamVector> checkpoints,
                      const UpscaleStrategy& strategy, double lambda, std::uint64_t seed = 0);

/// Full parameter vector at preference r: MoE layers decoded, static layers copied.
ParamVector unload_params(const UpscaledModel& model, std::span<const double> r);

/// Plain MLP at preference r (requires a dense layout).
nn::MlpModel unload(const UpscaledModel& model, std::span<const double> r);

/// Evaluates the up-scaled network at preference r directly, layer by layer.
Matrix moe_forward(const UpscaledModel& model, std::span<const double> r, const Matrix& inputs);

/// Routing weights of every MoE layer at preference r, in layer order.
std::vector<std::vector<double>> routing_weights(const UpscaledModel& model,
                                                 std::span<const double> r);

}  // namespace pwemoe::moe
