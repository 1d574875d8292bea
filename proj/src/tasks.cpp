// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/tasks.hpp"

#include <cmath>
#include <exception>
#include <numbers>

#include "pwemoe/error.hpp"

namespace pwemoe::tasks {

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kValidationStream = 2;
constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kBatchStream = 4;

Dataset make_clusters(std::size_t n, double angle, double separation, Rng& rng) {
  Dataset d{Matrix(n, 2), Matrix(n, 2), std::vector<int>(n)};
  std::normal_distribution<double> noise(0.0, 1.0);
  const double ux = std::cos(angle);
  const double uy = std::sin(angle);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double sign = label == 1 ? 1.0 : -1.0;
    const double nx = noise(rng);
    const double ny = noise(rng);
    d.inputs(i, 0) = sign * separation * ux + nx;
    d.inputs(i, 1) = sign * separation * uy + ny;
    d.targets(i, static_cast<std::size_t>(label)) = 1.0;
    d.labels[i] = label;
  }
  return d;
}

const Dataset& split_of(const TaskSuite& suite, std::size_t task, Split split) {
  const auto& td = suite.data.at(task);
  return split == Split::Train ? td.train : td.validation;
}

void check_task(const TaskSuite& suite, std::size_t task) {
  if (task >= suite.task_count)
    throw DomainError("task index " + std::to_string(task) + " out of range for " +
                      std::to_string(suite.task_count) + " tasks");
}

void check_params(const TaskSuite& suite, const ParamVector& params) {
  require_same_layout(suite.layout, params.layout());
}

ParamVector random_start(const TaskSuite& suite, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kInitStream));
  ParamVector p(suite.layout);
  if (suite.kind == SuiteKind::Quadratic) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : p.values()) v = normal(rng);
    return p;
  }
  for (std::size_t k = 0; k < suite.layout.size(); ++k) {
    const auto& e = suite.layout.entries()[k];
    const std::size_t out = e.shape[0];
    const std::size_t in = e.shape[1] - 1;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    auto seg = p.segment(k);
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t i = 0; i < in; ++i) seg[o * (in + 1) + i] = normal(rng);
  }
  return p;
}

// Mean loss and gradient over `tasks` (each task on its own batch).
double descend_step(const TaskSuite& suite, ParamVector& params, std::span<const std::size_t> tasks,
                    double lr, std::size_t batch_size, Rng& rng, std::size_t step) {
  const auto selector = all_layer_names(suite);
  std::vector<double> grad(params.size(), 0.0);
  double total = 0.0;
  const double weight = 1.0 / static_cast<double>(tasks.size());
  for (std::size_t t : tasks) {
    auto batch = sample_batch(suite, t, batch_size, rng);
    auto report = task_loss_and_grad(suite, params, t, batch, selector);
    total += weight * report.loss;
    auto g = report.grad.values();
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += weight * g[k];
  }
  if (!std::isfinite(total))
    throw TrainingError("non-finite training loss at step " + std::to_string(step),
                        static_cast<long>(step));
  auto v = params.values();
  for (std::size_t k = 0; k < grad.size(); ++k) v[k] -= lr * grad[k];
  return total;
}

TrainResult run_sgd(const TaskSuite& suite, ParamVector start, std::vector<std::size_t> tasks,
                    const SgdOptions& options, std::uint64_t stream) {
  if (options.steps == 0 || !(options.lr > 0.0))
    throw ConfigError("training needs steps >= 1 and lr > 0");
  TrainResult result{std::move(start), {}};
  result.losses.reserve(options.steps);
  Rng rng(derive_seed(options.seed, kBatchStream + 16 * stream));
  for (std::size_t s = 0; s < options.steps; ++s) {
    try {
      result.losses.push_back(
          descend_step(suite, result.params, tasks, options.lr, options.batch_size, rng, s));
    } catch (const NumericError& e) {
      throw TrainingError(std::string(e.what()) + " at step " + std::to_string(s),
                          static_cast<long>(s));
    }
  }
  for (double v : result.params.values())
    if (!std::isfinite(v))
      throw TrainingError("parameters diverged after step " + std::to_string(options.steps - 1),
                          static_cast<long>(options.steps - 1));
  return result;
}

}  // namespace

std::string_view to_string(SuiteKind kind) {
  return kind == SuiteKind::Quadratic ? "quadratic" : "cluster-classification";
}

SuiteKind suite_kind_from_string(std::string_view s) {
  if (s == "quadratic") return SuiteKind::Quadratic;
  if (s == "cluster-classification" || s == "cluster") return SuiteKind::ClusterClassification;
  throw ConfigError("unknown suite kind '" + std::string(s) + "'");
}

TaskSuite gen_quadratic_suite(std::size_t task_count, std::size_t dim,
                              std::vector<std::vector<double>> centers, std::size_t segments) {
  if (task_count < 2) throw DomainError("a suite needs at least two tasks");
  if (centers.size() != task_count)
    throw DomainError("expected " + std::to_string(task_count) + " centers, got " +
                      std::to_string(centers.size()));
  if (dim == 0 || segments == 0 || dim % segments != 0)
    throw DomainError("dimension " + std::to_string(dim) + " cannot be split into " +
                      std::to_string(segments) + " equal segments");
  for (const auto& c : centers)
    if (c.size() != dim) throw DomainError("center length does not match dimension");
  for (std::size_t i = 0; i < task_count; ++i)
    for (std::size_t j = i + 1; j < task_count; ++j)
      if (centers[i] == centers[j])
        throw DomainError("degenerate suite: centers " + std::to_string(i) + " and " +
                          std::to_string(j) + " coincide");
  TaskSuite suite;
  suite.kind = SuiteKind::Quadratic;
  suite.task_count = task_count;
  suite.input_dim = dim;
  suite.centers = std::move(centers);
  std::vector<LayoutEntry> entries;
  for (std::size_t s = 0; s < segments; ++s)
    entries.push_back({"seg" + std::to_string(s), {dim / segments}, SegmentKind::Raw});
  suite.layout = Layout(std::move(entries));
  return suite;
}

TaskSuite gen_cluster_classification(std::size_t task_count, std::uint64_t seed,
                                     const ClusterOptions& options) {
  if (task_count < 2) throw DomainError("a suite needs at least two tasks");
  if (options.n_per_task < 32 || options.validation_per_task < 32)
    throw DomainError("cluster tasks need at least 32 samples per split");
  TaskSuite suite;
  suite.kind = SuiteKind::ClusterClassification;
  suite.task_count = task_count;
  suite.input_dim = 2;
  suite.seed = seed;
  suite.arch = {{2, options.hidden, 2}, nn::Activation::Relu, nn::Activation::Identity};
  suite.layout = nn::mlp_layout(suite.arch);
  for (std::size_t t = 0; t < task_count; ++t) {
    const double angle = static_cast<double>(t) * std::numbers::pi / static_cast<double>(task_count);
    Rng train_rng(derive_seed(seed, kTrainStream + 16 * t));
    Rng val_rng(derive_seed(seed, kValidationStream + 16 * t));
    suite.data.push_back({make_clusters(options.n_per_task, angle, options.separation, train_rng),
                          make_clusters(options.validation_per_task, angle, options.separation,
                                        val_rng)});
  }
  return suite;
}

double task_loss(const TaskSuite& suite, const ParamVector& params, std::size_t task, Split split) {
  check_task(suite, task);
  check_params(suite, params);
  if (suite.kind == SuiteKind::Quadratic) {
    const auto& c = suite.centers[task];
    auto v = params.values();
    double acc = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) acc += (v[k] - c[k]) * (v[k] - c[k]);
    return acc;
  }
  const auto& d = split_of(suite, task, split);
  return nn::loss(nn::unflatten(params), {d.inputs, d.targets}, nn::LossKind::SoftmaxCrossEntropy);
}

double task_accuracy(const TaskSuite& suite, const ParamVector& params, std::size_t task,
                     Split split) {
  check_task(suite, task);
  check_params(suite, params);
  if (suite.kind == SuiteKind::Quadratic) return std::nan("");
  const auto& d = split_of(suite, task, split);
  const Matrix out = nn::forward(nn::unflatten(params), d.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const int predicted = out(i, 1) > out(i, 0) ? 1 : 0;
    correct += predicted == d.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(out.rows());
}

nn::GradientReport task_loss_and_grad(const TaskSuite& suite, const ParamVector& params,
                                      std::size_t task, std::span<const std::size_t> batch_indices,
                                      const std::set<std::string>& selector) {
  check_task(suite, task);
  check_params(suite, params);
  if (suite.kind == SuiteKind::Quadratic) {
    std::vector<std::string> names(selector.begin(), selector.end());
    nn::GradientReport report{0.0, ParamVector(suite.layout.subset(names)), selector};
    const auto& c = suite.centers[task];
    auto v = params.values();
    for (std::size_t k = 0; k < v.size(); ++k) report.loss += (v[k] - c[k]) * (v[k] - c[k]);
    for (std::size_t i = 0; i < report.grad.layout().size(); ++i) {
      const std::size_t src = suite.layout.index_of(report.grad.layout().entries()[i].name);
      const std::size_t off = suite.layout.offset(src);
      auto g = report.grad.segment(i);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = 2.0 * (v[off + k] - c[off + k]);
    }
    return report;
  }
  const auto& d = suite.data[task].train;
  nn::Batch batch;
  if (batch_indices.empty()) {
    batch = {d.inputs, d.targets};
  } else {
    batch = {d.inputs.gather_rows(batch_indices), d.targets.gather_rows(batch_indices)};
  }
  return nn::loss_and_grad(nn::unflatten(params), batch, nn::LossKind::SoftmaxCrossEntropy,
                           selector);
}

std::vector<std::size_t> sample_batch(const TaskSuite& suite, std::size_t task,
                                      std::size_t batch_size, Rng& rng) {
  if (suite.kind == SuiteKind::Quadratic || batch_size == 0) return {};
  check_task(suite, task);
  const std::size_t n = suite.data[task].train.inputs.rows();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

std::set<std::string> all_layer_names(const TaskSuite& suite) {
  std::set<std::string> names;
  for (const auto& e : suite.layout.entries()) names.insert(e.name);
  return names;
}

TrainResult pretrain(const TaskSuite& suite, const SgdOptions& options) {
  std::vector<std::size_t> all(suite.task_count);
  for (std::size_t t = 0; t < all.size(); ++t) all[t] = t;
  return run_sgd(suite, random_start(suite, options.seed), std::move(all), options, 0);
}

TrainResult finetune(const ParamVector& pretrained, const TaskSuite& suite, std::size_t task,
                     const SgdOptions& options) {
  check_task(suite, task);
  check_params(suite, pretrained);
  return run_sgd(suite, pretrained, {task}, options, task + 1);
}

CheckpointSet build_checkpoints(const TaskSuite& suite, const SgdOptions& pretrain_options,
                                const SgdOptions& finetune_options) {
  CheckpointSet set;
  set.pretrained = pretrain(suite, pretrain_options).params;
  set.finetuned.resize(suite.task_count);
  set.suite_seed = suite.seed;
  set.steps = finetune_options.steps;
  set.lr = finetune_options.lr;
  std::vector<std::exception_ptr> errors(suite.task_count);
  const long tasks = static_cast<long>(suite.task_count);
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < tasks; ++t) {
    try {
      set.finetuned[static_cast<std::size_t>(t)] =
          finetune(set.pretrained, suite, static_cast<std::size_t>(t), finetune_options).params;
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return set;
}

}  // namespace pwemoe::tasks
