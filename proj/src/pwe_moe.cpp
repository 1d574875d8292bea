// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/pwe_moe.hpp"

#include <algorithm>
#include <set>

#include "pwemoe/error.hpp"
#include "pwemoe/preference.hpp"
#include "pwemoe/rng.hpp"

namespace pwemoe::moe {

namespace {

std::vector<double> hidden_preactivation(const Router& router, std::span<const double> r) {
  const std::size_t h = router.hidden_width();
  std::vector<double> z(h);
  for (std::size_t i = 0; i < h; ++i) {
    double acc = router.b1[i];
    for (std::size_t j = 0; j < r.size(); ++j) acc += router.w1(i, j) * r[j];
    z[i] = acc;
  }
  return z;
}

void check_router_input(const Router& router, std::span<const double> r) {
  if (r.size() != router.task_count())
    throw ShapeError("preference length " + std::to_string(r.size()) + " does not match router with " +
                     std::to_string(router.task_count()) + " tasks");
  require_simplex(r);
}

std::span<const double> layer_values(const UpscaledModel& model, std::size_t index,
                                     std::span<const double> r, std::vector<double>& scratch) {
  const auto& entry = model.layout().entries()[index];
  if (const PweMoeLayer* layer = model.find_moe_layer(entry.name)) {
    scratch = decode(*layer, route(layer->router, r));
    return scratch;
  }
  return model.static_params().segment(entry.name);
}

}  // namespace

std::size_t router_parameter_count(std::size_t task_count) {
  return 4 * task_count * task_count + 3 * task_count;
}

std::size_t Router::parameter_count() const {
  return w1.data().size() + b1.size() + w2.data().size() + b2.size();
}

std::vector<double> Router::flat() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  out.insert(out.end(), w1.data().begin(), w1.data().end());
  out.insert(out.end(), b1.begin(), b1.end());
  out.insert(out.end(), w2.data().begin(), w2.data().end());
  out.insert(out.end(), b2.begin(), b2.end());
  return out;
}

void Router::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ShapeError("router parameter count mismatch");
  auto it = flat.begin();
  auto take = [&](std::span<double> dst) {
    std::copy(it, it + static_cast<long>(dst.size()), dst.begin());
    it += static_cast<long>(dst.size());
  };
  take(w1.data());
  take(b1);
  take(w2.data());
  take(b2);
}

Router init_router(std::size_t task_count, double lambda, std::uint64_t seed, double stddev) {
  if (task_count < 2) throw DomainError("router needs at least two tasks");
  if (!(stddev > 0.0)) throw DomainError("router init stddev must be positive");
  const std::size_t hidden = 2 * task_count;
  Router router{Matrix(hidden, task_count), std::vector<double>(hidden, 0.0),
                Matrix(task_count, hidden), std::vector<double>(task_count, lambda)};
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& v : router.w1.data()) v = normal(rng);
  for (double& v : router.w2.data()) v = normal(rng);
  return router;
}

std::vector<double> route(const Router& router, std::span<const double> r) {
  check_router_input(router, r);
  const auto z = hidden_preactivation(router, r);
  std::vector<double> w(router.task_count());
  for (std::size_t t = 0; t < w.size(); ++t) {
    double acc = router.b2[t];
    for (std::size_t i = 0; i < z.size(); ++i) acc += router.w2(t, i) * (z[i] > 0.0 ? z[i] : 0.0);
    w[t] = acc;
  }
  return w;
}

std::vector<double> route_backward(const Router& router, std::span<const double> r,
                                   std::span<const double> grad_w) {
  check_router_input(router, r);
  if (grad_w.size() != router.task_count()) throw ShapeError("routing gradient length mismatch");
  const std::size_t T = router.task_count();
  const std::size_t H = router.hidden_width();
  const auto z = hidden_preactivation(router, r);
  Router g{Matrix(H, T), std::vector<double>(H, 0.0), Matrix(T, H), std::vector<double>(T, 0.0)};
  for (std::size_t t = 0; t < T; ++t) {
    g.b2[t] = grad_w[t];
    for (std::size_t i = 0; i < H; ++i) g.w2(t, i) = grad_w[t] * (z[i] > 0.0 ? z[i] : 0.0);
  }
  for (std::size_t i = 0; i < H; ++i) {
    if (!(z[i] > 0.0)) continue;
    double dh = 0.0;
    for (std::size_t t = 0; t < T; ++t) dh += router.w2(t, i) * grad_w[t];
    g.b1[i] = dh;
    for (std::size_t j = 0; j < T; ++j) g.w1(i, j) = dh * r[j];
  }
  return g.flat();
}

std::vector<double> decode(const PweMoeLayer& layer, std::span<const double> w) {
  return layer.dictionary.decode(w);
}

UpscaleStrategy UpscaleStrategy::all_layers() {
  return {"all-layers", [](std::size_t, const std::string&) { return true; }};
}

UpscaleStrategy UpscaleStrategy::odd_layers_only() {
  return {"odd-layers-only", [](std::size_t index, const std::string&) { return index % 2 == 1; }};
}

UpscaleStrategy UpscaleStrategy::named(std::vector<std::string> names) {
  std::set<std::string> set(names.begin(), names.end());
  return {"named", [set](std::size_t, const std::string& n) { return set.contains(n); }};
}

UpscaleStrategy UpscaleStrategy::preset(std::string_view name) {
  if (name == "all-layers") return all_layers();
  if (name == "odd-layers-only") return odd_layers_only();
  throw DomainError("unknown up-scaling strategy '" + std::string(name) + "'");
}

UpscaledModel::UpscaledModel(Layout layout, std::vector<PweMoeLayer> moe_layers,
                             ParamVector static_params, double lambda)
    : layout_(std::move(layout)),
      moe_layers_(std::move(moe_layers)),
      static_params_(std::move(static_params)),
      lambda_(lambda) {
  if (moe_layers_.empty()) throw DomainError("an up-scaled model needs at least one MoE layer");
  std::set<std::string> covered;
  const std::size_t T = moe_layers_.front().task_count();
  for (const auto& l : moe_layers_) {
    const auto idx = layout_.index_of(l.name);
    if (!(l.dictionary.base().layout().size() == 1 &&
          l.dictionary.base().layout().entries()[0] == layout_.entries()[idx]))
      throw LayoutError("MoE layer '" + l.name + "' base does not match the model layout");
    if (l.task_count() != T || l.router.task_count() != T)
      throw LayoutError("MoE layer '" + l.name + "' task count is inconsistent");
    covered.insert(l.name);
  }
  for (const auto& e : static_params_.layout().entries()) {
    layout_.index_of(e.name);
    if (!covered.insert(e.name).second)
      throw LayoutError("layer '" + e.name + "' is both up-scaled and static");
  }
  for (const auto& e : layout_.entries())
    if (!covered.contains(e.name)) throw LayoutError("layer '" + e.name + "' is not covered");
}

std::size_t UpscaledModel::task_count() const {
  return moe_layers_.empty() ? 0 : moe_layers_.front().task_count();
}

const PweMoeLayer* UpscaledModel::find_moe_layer(std::string_view name) const {
  for (const auto& l : moe_layers_)
    if (l.name == name) return &l;
  return nullptr;
}

std::vector<std::string> UpscaledModel::moe_layer_names() const {
  std::vector<std::string> names;
  for (const auto& l : moe_layers_) names.push_back(l.name);
  return names;
}

std::size_t UpscaledModel::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : moe_layers_) n += l.router.parameter_count();
  return n;
}

std::uint64_t UpscaledModel::frozen_checksum() const {
  std::vector<double> all(static_params_.values().begin(), static_params_.values().end());
  for (const auto& l : moe_layers_) {
    auto b = l.dictionary.base().values();
    all.insert(all.end(), b.begin(), b.end());
    for (const auto& c : l.dictionary.columns()) all.insert(all.end(), c.begin(), c.end());
  }
  return checksum(all);
}

UpscaledModel upscale(const ParamVector& pretrained, std::span<const ParamVector> checkpoints,
                      const UpscaleStrategy& strategy, double lambda, std::uint64_t seed) {
  if (checkpoints.size() < 2) throw DomainError("up-scaling needs at least two checkpoints");
  const Layout& layout = pretrained.layout();
  for (const auto& c : checkpoints) require_same_layout(layout, c.layout());

  std::vector<std::string> moe_names;
  std::vector<std::string> static_names;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& name = layout.entries()[i].name;
    (strategy.select(i, name) ? moe_names : static_names).push_back(name);
  }
  if (moe_names.empty())
    throw DomainError("up-scaling strategy '" + strategy.name + "' selects no layers");

  std::vector<PweMoeLayer> layers;
  const std::size_t T = checkpoints.size();
  for (std::size_t k = 0; k < moe_names.size(); ++k) {
    const std::string& name = moe_names[k];
    std::vector<std::string> one{name};
    std::vector<ParamVector> parts;
    for (const auto& c : checkpoints) parts.push_back(c.select(one));
    layers.push_back({name, merge::task_vectors(pretrained.select(one), parts),
                      init_router(T, lambda, derive_seed(seed, k))});
  }

  ParamVector static_params;
  if (!static_names.empty()) {
    std::vector<ParamVector> parts;
    for (const auto& c : checkpoints) parts.push_back(c.select(static_names));
    const ParamVector base = pretrained.select(static_names);
    static_params = merge::task_arithmetic(base, merge::task_vectors(base, parts), lambda);
  }
  return UpscaledModel(layout, std::move(layers), std::move(static_params), lambda);
}

ParamVector unload_params(const UpscaledModel& model, std::span<const double> r) {
  ParamVector out(model.layout());
  std::vector<double> scratch;
  for (std::size_t i = 0; i < model.layout().size(); ++i) {
    auto src = layer_values(model, i, r, scratch);
    std::copy(src.begin(), src.end(), out.segment(i).begin());
  }
  return out;
}

nn::MlpModel unload(const UpscaledModel& model, std::span<const double> r) {
  return nn::unflatten(unload_params(model, r));
}

Matrix moe_forward(const UpscaledModel& model, std::span<const double> r, const Matrix& inputs) {
  Matrix x = inputs;
  std::vector<double> scratch;
  for (std::size_t i = 0; i < model.layout().size(); ++i) {
    auto values = layer_values(model, i, r, scratch);
    const Layout single({model.layout().entries()[i]});
    x = nn::forward(nn::unflatten(values, single), x);
  }
  return x;
}

std::vector<std::vector<double>> routing_weights(const UpscaledModel& model,
                                                 std::span<const double> r) {
  std::vector<std::vector<double>> out;
  for (const auto& l : model.moe_layers()) out.push_back(route(l.router, r));
  return out;
}

}  // namespace pwemoe::moe
