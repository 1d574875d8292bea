// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/nn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pwemoe/error.hpp"
#include "pwemoe/kernels.hpp"

namespace pwemoe::nn {

namespace {

std::vector<double> augmented(const DenseLayer& layer) {
  const std::size_t in = layer.in_dim();
  std::vector<double> a(layer.out_dim() * (in + 1));
  for (std::size_t o = 0; o < layer.out_dim(); ++o) {
    auto w = layer.weight.row(o);
    std::copy(w.begin(), w.end(), a.begin() + static_cast<long>(o * (in + 1)));
    a[o * (in + 1) + in] = layer.bias[o];
  }
  return a;
}

void softmax_rows(Matrix& m) {
  for (std::size_t n = 0; n < m.rows(); ++n) {
    auto r = m.row(n);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : r) v /= sum;
  }
}

Matrix activate(const Matrix& z, Activation act) {
  Matrix y = z;
  switch (act) {
    case Activation::Relu:
      for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::Softmax: softmax_rows(y); break;
    case Activation::Identity: break;
  }
  return y;
}

// dL/dz from dL/dy through the activation; y is the activation output.
Matrix activation_backward(const Matrix& dy, const Matrix& z, const Matrix& y, Activation act) {
  Matrix dz = dy;
  switch (act) {
    case Activation::Relu:
      for (std::size_t k = 0; k < dz.data().size(); ++k)
        if (!(z.data()[k] > 0.0)) dz.data()[k] = 0.0;
      break;
    case Activation::Softmax:
      for (std::size_t n = 0; n < dz.rows(); ++n) {
        auto p = y.row(n);
        auto g = dz.row(n);
        double dot = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) dot += p[k] * g[k];
        for (std::size_t k = 0; k < p.size(); ++k) g[k] = p[k] * (g[k] - dot);
      }
      break;
    case Activation::Identity: break;
  }
  return dz;
}

void check_finite(const Matrix& m, const std::string& where) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw NumericError("non-finite activation in layer '" + where + "'");
}

struct Tape {
  std::vector<std::vector<double>> aug;
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activations
  Matrix output;
};

Tape run(const MlpModel& model, const Matrix& inputs, bool keep) {
  const auto& layers = model.layers();
  if (layers.empty()) throw ShapeError("model has no layers");
  if (inputs.cols() != model.input_dim())
    throw ShapeError("input width " + std::to_string(inputs.cols()) + " does not match layer '" +
                     layers.front().name + "' input dimension " +
                     std::to_string(model.input_dim()));
  Tape tape;
  Matrix x = inputs;
  for (const auto& layer : layers) {
    auto a = augmented(layer);
    Matrix z(x.rows(), layer.out_dim());
    kernels::dense_forward(a, x, z);
    Matrix y = activate(z, layer.activation);
    check_finite(y, layer.name);
    if (keep) {
      tape.aug.push_back(std::move(a));
      tape.inputs.push_back(std::move(x));
      tape.pre.push_back(std::move(z));
    }
    x = std::move(y);
  }
  tape.output = std::move(x);
  return tape;
}

}  // namespace

SegmentKind to_segment_kind(Activation a) {
  switch (a) {
    case Activation::Relu: return SegmentKind::DenseRelu;
    case Activation::Softmax: return SegmentKind::DenseSoftmax;
    case Activation::Identity: return SegmentKind::DenseIdentity;
  }
  return SegmentKind::DenseIdentity;
}

Activation to_activation(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::DenseRelu: return Activation::Relu;
    case SegmentKind::DenseSoftmax: return Activation::Softmax;
    case SegmentKind::DenseIdentity: return Activation::Identity;
    case SegmentKind::Raw: break;
  }
  throw LayoutError("raw segment cannot be realized as a dense layer");
}

MlpModel::MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (!names.insert(l.name).second) throw ShapeError("duplicate layer name '" + l.name + "'");
    if (l.bias.size() != l.out_dim())
      throw ShapeError("bias length of layer '" + l.name + "' does not match its output dimension");
    if (i > 0 && layers_[i - 1].out_dim() != l.in_dim())
      throw ShapeError("layer '" + l.name + "' input dimension " + std::to_string(l.in_dim()) +
                       " does not chain with previous output " +
                       std::to_string(layers_[i - 1].out_dim()));
  }
}

std::size_t MlpModel::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t MlpModel::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

Layout mlp_layout(const ArchSpec& arch) {
  if (arch.widths.size() < 2) throw ShapeError("architecture needs at least input and output widths");
  std::vector<LayoutEntry> entries;
  for (std::size_t i = 0; i + 1 < arch.widths.size(); ++i) {
    const bool last = i + 2 == arch.widths.size();
    entries.push_back({"fc" + std::to_string(i),
                       {arch.widths[i + 1], arch.widths[i] + 1},
                       to_segment_kind(last ? arch.output : arch.hidden)});
  }
  return Layout(std::move(entries));
}

ParamVector flatten(const MlpModel& model) {
  std::vector<LayoutEntry> entries;
  std::vector<double> values;
  for (const auto& l : model.layers()) {
    entries.push_back({l.name, {l.out_dim(), l.in_dim() + 1}, to_segment_kind(l.activation)});
    auto a = augmented(l);
    values.insert(values.end(), a.begin(), a.end());
  }
  return ParamVector(Layout(std::move(entries)), std::move(values));
}

MlpModel unflatten(std::span<const double> values, const Layout& layout) {
  if (values.size() != layout.total())
    throw LayoutError("parameter count " + std::to_string(values.size()) +
                      " does not match layout total " + std::to_string(layout.total()));
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto& e = layout.entries()[k];
    if (!is_dense(e.kind)) throw LayoutError("layer '" + e.name + "' is not a dense layer");
    const std::size_t out = e.shape[0];
    const std::size_t in = e.shape[1] - 1;
    auto seg = values.subspan(layout.offset(k), e.count());
    DenseLayer layer{e.name, Matrix(out, in), std::vector<double>(out), to_activation(e.kind)};
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) layer.weight(o, i) = seg[o * (in + 1) + i];
      layer.bias[o] = seg[o * (in + 1) + in];
    }
    layers.push_back(std::move(layer));
  }
  return MlpModel(std::move(layers));
}

MlpModel unflatten(const ParamVector& params) { return unflatten(params.values(), params.layout()); }

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  return run(model, inputs, false).output;
}

ForwardTrace forward_trace(const MlpModel& model, const Matrix& inputs) {
  Tape tape = run(model, inputs, true);
  return {std::move(tape.inputs), std::move(tape.output)};
}

namespace {

double compute_loss(const Tape& tape, const MlpModel& model, const Batch& batch,
                    LossKind loss_kind) {
  const Matrix& out = tape.output;
  if (batch.targets.rows() != out.rows() || batch.targets.cols() != out.cols())
    throw ShapeError("target shape does not match output of layer '" + model.layers().back().name + "'");
  const double n = static_cast<double>(out.rows());
  double total = 0.0;
  if (loss_kind == LossKind::Mse) {
    for (std::size_t k = 0; k < out.data().size(); ++k) {
      const double d = out.data()[k] - batch.targets.data()[k];
      total += d * d;
    }
    return total / (n * static_cast<double>(out.cols()));
  }
  const Matrix& logits = tape.pre.back();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t k = 0; k < z.size(); ++k) total -= batch.targets(r, k) * (z[k] - lse);
  }
  return total / n;
}

void check_loss_kind(const MlpModel& model, LossKind loss_kind) {
  if (loss_kind == LossKind::SoftmaxCrossEntropy &&
      model.layers().back().activation == Activation::Relu)
    throw ShapeError("softmax cross-entropy needs an identity or softmax output on layer '" +
                     model.layers().back().name + "'");
}

}  // namespace

double loss(const MlpModel& model, const Batch& batch, LossKind loss_kind) {
  if (batch.inputs.rows() == 0) throw ShapeError("empty batch");
  check_loss_kind(model, loss_kind);
  Tape tape = run(model, batch.inputs, true);
  const double value = compute_loss(tape, model, batch, loss_kind);
  if (!std::isfinite(value)) throw NumericError("non-finite loss");
  return value;
}

GradientReport loss_and_grad(const MlpModel& model, const Batch& batch, LossKind loss_kind,
                             const std::set<std::string>& selector) {
  if (batch.inputs.rows() == 0) throw ShapeError("empty batch");
  check_loss_kind(model, loss_kind);
  const auto& layers = model.layers();
  std::vector<std::string> names;
  std::size_t lowest = layers.size();
  for (const auto& s : selector) {
    bool found = false;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].name == s) {
        found = true;
        lowest = std::min(lowest, i);
      }
    if (!found) throw SelectorError("unknown layer '" + s + "' in gradient selector");
    names.push_back(s);
  }

  Tape tape = run(model, batch.inputs, true);
  GradientReport report;
  report.selector = selector;
  report.loss = compute_loss(tape, model, batch, loss_kind);
  if (!std::isfinite(report.loss)) throw NumericError("non-finite loss");
  report.grad = ParamVector(flatten(model).layout().subset(names));
  if (selector.empty()) return report;

  const std::size_t rows = tape.output.rows();
  const double n = static_cast<double>(rows);
  Matrix dz;
  if (loss_kind == LossKind::SoftmaxCrossEntropy) {
    dz = tape.pre.back();
    softmax_rows(dz);
    for (std::size_t r = 0; r < rows; ++r) {
      double tsum = 0.0;
      for (std::size_t k = 0; k < dz.cols(); ++k) tsum += batch.targets(r, k);
      for (std::size_t k = 0; k < dz.cols(); ++k)
        dz(r, k) = (dz(r, k) * tsum - batch.targets(r, k)) / n;
    }
  } else {
    Matrix dy(rows, tape.output.cols());
    const double scale = 2.0 / (n * static_cast<double>(tape.output.cols()));
    for (std::size_t k = 0; k < dy.data().size(); ++k)
      dy.data()[k] = scale * (tape.output.data()[k] - batch.targets.data()[k]);
    dz = activation_backward(dy, tape.pre.back(), tape.output, layers.back().activation);
  }

  for (std::size_t li = layers.size(); li-- > lowest;) {
    const auto& layer = layers[li];
    if (selector.contains(layer.name))
      kernels::dense_grad_weights(dz, tape.inputs[li], 1.0, report.grad.segment(layer.name));
    if (li == lowest) break;
    Matrix dx(rows, layer.in_dim());
    kernels::dense_grad_input(tape.aug[li], dz, dx);
    // tape.inputs[li] is the activation output of layer li - 1.
    dz = activation_backward(dx, tape.pre[li - 1], tape.inputs[li], layers[li - 1].activation);
  }
  return report;
}

std::set<std::string> all_layers(const MlpModel& model) {
  std::set<std::string> names;
  for (const auto& l : model.layers()) names.insert(l.name);
  return names;
}

}  // namespace pwemoe::nn
