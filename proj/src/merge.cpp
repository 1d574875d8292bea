// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/merge.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "pwemoe/error.hpp"
#include "pwemoe/kernels.hpp"
#include "pwemoe/nn.hpp"
#include "pwemoe/tasks.hpp"

namespace pwemoe::merge {

namespace {

void require_nonempty(std::span<const ParamVector> checkpoints, const char* what) {
  if (checkpoints.empty()) throw DomainError(std::string(what) + " needs at least one checkpoint");
  for (const auto& c : checkpoints.subspan(1)) require_same_layout(checkpoints[0].layout(), c.layout());
}

std::size_t trim_count(double fraction, std::size_t n) {
  const double raw = fraction * static_cast<double>(n);
  // Absorb representation error such as (2/3) * 3 = 2.0000000000000004.
  const auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(keep, 1, n);
}

std::vector<double> trimmed(std::span<const double> tau, std::size_t keep) {
  std::vector<std::size_t> order(tau.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(tau[a]) > std::abs(tau[b]);
  });
  std::vector<double> out(tau.size(), 0.0);
  for (std::size_t k = 0; k < keep; ++k) out[order[k]] = tau[order[k]];
  return out;
}

using EigenMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

EigenMatrix to_eigen(const Matrix& m) {
  EigenMatrix e(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  return e;
}

Matrix augmented_gram(const Matrix& x) {
  const std::size_t d = x.cols() + 1;
  Matrix g(d, d);
  for (std::size_t n = 0; n < x.rows(); ++n) {
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = i < x.cols() ? x(n, i) : 1.0;
      for (std::size_t j = 0; j < d; ++j) g(i, j) += xi * (j < x.cols() ? x(n, j) : 1.0);
    }
  }
  return g;
}

}  // namespace

TaskVectorDictionary::TaskVectorDictionary(ParamVector base, std::vector<std::vector<double>> columns)
    : base_(std::move(base)), columns_(std::move(columns)) {
  for (const auto& c : columns_)
    if (c.size() != base_.size()) throw LayoutError("task vector length does not match base");
}

std::vector<double> TaskVectorDictionary::decode(std::span<const double> w) const {
  if (w.size() != columns_.size())
    throw ShapeError("routing weight length " + std::to_string(w.size()) + " does not match " +
                     std::to_string(columns_.size()) + " task vectors");
  auto b = base_.values();
  std::vector<double> out(b.begin(), b.end());
  for (std::size_t t = 0; t < columns_.size(); ++t) {
    const auto& col = columns_[t];
    const double wt = w[t];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += wt * col[k];
  }
  return out;
}

std::vector<double> TaskVectorDictionary::transpose_apply(std::span<const double> g) const {
  if (g.size() != rows()) throw ShapeError("gradient length does not match dictionary rows");
  std::vector<double> out(columns_.size(), 0.0);
  for (std::size_t t = 0; t < columns_.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) acc += columns_[t][k] * g[k];
    out[t] = acc;
  }
  return out;
}

TaskVectorDictionary task_vectors(const ParamVector& base, std::span<const ParamVector> checkpoints) {
  std::vector<std::vector<double>> cols;
  auto b = base.values();
  for (const auto& c : checkpoints) {
    require_same_layout(base.layout(), c.layout());
    auto v = c.values();
    std::vector<double> col(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) col[k] = v[k] - b[k];
    cols.push_back(std::move(col));
  }
  return TaskVectorDictionary(base, std::move(cols));
}

ParamVector simple_average(std::span<const ParamVector> checkpoints) {
  require_nonempty(checkpoints, "simple_average");
  ParamVector out(checkpoints[0].layout());
  auto o = out.values();
  for (const auto& c : checkpoints) {
    auto v = c.values();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] += v[k];
  }
  const double n = static_cast<double>(checkpoints.size());
  for (double& v : o) v /= n;
  return out;
}

ParamVector task_arithmetic(const ParamVector& base, const TaskVectorDictionary& dictionary,
                            double lambda) {
  require_same_layout(base.layout(), dictionary.base().layout());
  if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
  ParamVector out = base;
  auto o = out.values();
  std::vector<double> sum(o.size(), 0.0);
  for (const auto& col : dictionary.columns())
    for (std::size_t k = 0; k < o.size(); ++k) sum[k] += col[k];
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += lambda * sum[k];
  return out;
}

ParamVector ties_merging(const ParamVector& base, const TaskVectorDictionary& dictionary,
                         double trim_fraction, double lambda) {
  require_same_layout(base.layout(), dictionary.base().layout());
  if (!(trim_fraction > 0.0 && trim_fraction <= 1.0))
    throw DomainError("trim fraction must lie in (0, 1]");
  if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
  const std::size_t n = base.size();
  const std::size_t keep = trim_count(trim_fraction, n);
  std::vector<std::vector<double>> kept;
  for (const auto& col : dictionary.columns()) kept.push_back(trimmed(col, keep));

  ParamVector out = base;
  auto o = out.values();
  for (std::size_t k = 0; k < n; ++k) {
    double sum = 0.0;
    for (const auto& t : kept) sum += t[k];
    if (sum == 0.0) continue;
    const bool positive = sum > 0.0;
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& t : kept) {
      if (t[k] != 0.0 && (t[k] > 0.0) == positive) {
        acc += t[k];
        ++count;
      }
    }
    if (count > 0) o[k] += lambda * (acc / static_cast<double>(count));
  }
  return out;
}

FisherMergeResult fisher_merge(std::span<const ParamVector> checkpoints,
                               std::span<const std::vector<double>> fishers) {
  require_nonempty(checkpoints, "fisher_merge");
  if (fishers.size() != checkpoints.size())
    throw DomainError("fisher_merge needs one Fisher vector per checkpoint");
  const std::size_t n = checkpoints[0].size();
  for (const auto& f : fishers)
    if (f.size() != n) throw LayoutError("Fisher vector length does not match checkpoints");
  FisherMergeResult result{ParamVector(checkpoints[0].layout()), 0};
  auto o = result.merged.values();
  const double count = static_cast<double>(checkpoints.size());
  for (std::size_t k = 0; k < n; ++k) {
    double num = 0.0;
    double den = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      const double phi = checkpoints[i].values()[k];
      num += fishers[i][k] * phi;
      den += fishers[i][k];
      mean += phi;
    }
    if (den == 0.0) {
      o[k] = mean / count;
      ++result.zero_fisher_coordinates;
    } else {
      o[k] = num / std::max(den, kFisherEpsilon);
    }
  }
  return result;
}

std::vector<double> empirical_fisher(const tasks::TaskSuite& suite, const ParamVector& params,
                                     std::size_t task, std::size_t samples) {
  if (samples == 0) throw DomainError("Fisher estimate needs at least one sample");
  const auto selector = tasks::all_layer_names(suite);
  std::vector<double> fisher(params.size(), 0.0);
  const std::size_t available =
      suite.kind == tasks::SuiteKind::Quadratic ? 1 : suite.data.at(task).train.inputs.rows();
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t idx[1] = {s % available};
    std::span<const std::size_t> batch =
        suite.kind == tasks::SuiteKind::Quadratic ? std::span<const std::size_t>{} : idx;
    auto report = tasks::task_loss_and_grad(suite, params, task, batch, selector);
    auto g = report.grad.values();
    for (std::size_t k = 0; k < fisher.size(); ++k) fisher[k] += g[k] * g[k];
  }
  for (double& f : fisher) f /= static_cast<double>(samples);
  return fisher;
}

FisherMergeResult fisher_merge(std::span<const ParamVector> checkpoints,
                               const tasks::TaskSuite& suite, std::size_t fisher_samples) {
  if (checkpoints.size() != suite.task_count)
    throw DomainError("fisher_merge needs one checkpoint per task");
  std::vector<std::vector<double>> fishers;
  for (std::size_t i = 0; i < checkpoints.size(); ++i)
    fishers.push_back(empirical_fisher(suite, checkpoints[i], i, fisher_samples));
  return fisher_merge(checkpoints, fishers);
}

Matrix regmean_merge(std::span<const Matrix> weights, std::span<const Matrix> grams) {
  if (weights.empty() || weights.size() != grams.size())
    throw DomainError("regmean needs one Gram matrix per weight matrix");
  const std::size_t out = weights[0].rows();
  const std::size_t in = weights[0].cols();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].rows() != out || weights[i].cols() != in)
      throw ShapeError("regmean weight shapes differ");
    if (grams[i].rows() != in || grams[i].cols() != in)
      throw ShapeError("regmean Gram dimension does not match weight input dimension");
  }
  const auto dim = static_cast<Eigen::Index>(in);
  EigenMatrix gram_sum = EigenMatrix::Zero(dim, dim);
  EigenMatrix rhs = EigenMatrix::Zero(dim, static_cast<Eigen::Index>(out));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    EigenMatrix g = to_eigen(grams[i]);
    if (!g.isApprox(g.transpose(), 1e-12)) throw DomainError("regmean Gram matrix is not symmetric");
    gram_sum += g;
    rhs += g * to_eigen(weights[i]).transpose();
  }
  // Plain solve when the summed Gram is well conditioned; otherwise add
  // delta * I with delta = 1e-6 * trace / dim.
  Eigen::LDLT<EigenMatrix> ldlt(gram_sum);
  EigenMatrix solution;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-10) {
    solution = ldlt.solve(rhs);
  } else {
    const double delta = 1e-6 * gram_sum.trace() / static_cast<double>(in);
    EigenMatrix regularized = gram_sum;
    regularized.diagonal().array() += delta;
    Eigen::FullPivLU<EigenMatrix> lu(regularized);
    if (!(delta > 0.0) || !lu.isInvertible())
      throw NumericError("regmean system is singular even after regularization");
    solution = lu.solve(rhs);
  }
  if (!solution.allFinite()) throw NumericError("regmean solution is not finite");
  Matrix merged(out, in);
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i)
      merged(o, i) = solution(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o));
  return merged;
}

ParamVector regmean_merge(std::span<const ParamVector> checkpoints, const tasks::TaskSuite& suite) {
  require_nonempty(checkpoints, "regmean_merge");
  if (checkpoints.size() != suite.task_count)
    throw DomainError("regmean_merge needs one checkpoint per task");
  const Layout& layout = checkpoints[0].layout();
  ParamVector merged = simple_average(checkpoints);
  if (suite.kind == tasks::SuiteKind::Quadratic) return merged;

  std::vector<nn::ForwardTrace> traces;
  for (std::size_t i = 0; i < checkpoints.size(); ++i)
    traces.push_back(nn::forward_trace(nn::unflatten(checkpoints[i]), suite.data[i].train.inputs));
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const auto& e = layout.entries()[l];
    if (!is_dense(e.kind)) continue;
    std::vector<Matrix> weights;
    std::vector<Matrix> grams;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      auto seg = checkpoints[i].segment(l);
      weights.emplace_back(e.shape[0], e.shape[1], std::vector<double>(seg.begin(), seg.end()));
      grams.push_back(augmented_gram(traces[i].layer_inputs[l]));
    }
    Matrix w = regmean_merge(weights, grams);
    auto dst = merged.segment(l);
    std::copy(w.data().begin(), w.data().end(), dst.begin());
  }
  return merged;
}

Matrix param_distance_matrix(std::span<const ParamVector> checkpoints,
                             const std::set<std::string>& selector) {
  if (checkpoints.size() < 2) throw DomainError("distance matrix needs at least two checkpoints");
  if (selector.empty()) throw SelectorError("empty layer selector");
  require_nonempty(checkpoints, "param_distance_matrix");
  std::vector<std::string> names(selector.begin(), selector.end());
  const ParamVector first = checkpoints[0].select(names);
  Matrix points(checkpoints.size(), first.size());
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const ParamVector selected = checkpoints[i].select(names);
    std::copy(selected.values().begin(), selected.values().end(), points.row(i).begin());
  }
  return kernels::pairwise_distances(points);
}

}  // namespace pwemoe::merge
