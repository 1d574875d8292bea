// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/trainer.hpp"

#include <cmath>
#include <exception>
#include <sstream>

#include "pwemoe/error.hpp"

namespace pwemoe::train {

namespace {

constexpr std::uint64_t kRouterStream = 101;
constexpr std::uint64_t kJointStream = 102;

std::string describe(std::span<const double> r) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < r.size(); ++i) os << (i ? ", " : "") << r[i];
  os << ")";
  return os.str();
}

// Per-task loss and gradient, tasks evaluated concurrently.
std::vector<nn::GradientReport> evaluate_tasks(const tasks::TaskSuite& suite,
                                               const ParamVector& params,
                                               const std::vector<std::vector<std::size_t>>& batches,
                                               const std::set<std::string>& selector) {
  const std::size_t T = suite.task_count;
  std::vector<nn::GradientReport> reports(T);
  std::vector<std::exception_ptr> errors(T);
#pragma omp parallel for schedule(static)
  for (long t = 0; t < static_cast<long>(T); ++t) {
    const auto task = static_cast<std::size_t>(t);
    try {
      reports[task] = tasks::task_loss_and_grad(suite, params, task, batches[task], selector);
    } catch (...) {
      errors[task] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return reports;
}

std::vector<double> aggregation_weights(Mode mode, std::span<const double> losses,
                                        std::span<const double> r, double epo_tol) {
  if (mode == Mode::Epo) return scalar::epo_step_weights(losses, r, epo_tol);
  return {r.begin(), r.end()};
}

double safe_non_uniformity(std::span<const double> losses, std::span<const double> r) {
  return scalar::ls_scalarize(losses, r) > 0.0 ? scalar::non_uniformity(losses, r) : 0.0;
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Ls: return "ls";
    case Mode::Epo: return "epo";
    case Mode::Mgda: return "mgda";
  }
  return "ls";
}

Mode mode_from_string(std::string_view s) {
  if (s == "ls") return Mode::Ls;
  if (s == "epo") return Mode::Epo;
  if (s == "mgda") return Mode::Mgda;
  throw ConfigError("unknown training mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  std::string bad;
  if (steps == 0) bad += " steps must be >= 1;";
  if (!(lr > 0.0)) bad += " lr must be > 0;";
  if (!(dirichlet_alpha > 0.0)) bad += " dirichlet_alpha must be > 0;";
  if (!(epo_tol > 0.0)) bad += " epo_tol must be > 0;";
  if (!bad.empty()) throw ConfigError("invalid training config:" + bad);
}

Preference sample_preference(std::size_t task_count, double alpha, Rng& rng) {
  if (task_count < 2) throw DomainError("preferences need at least two tasks");
  if (!(alpha > 0.0)) throw DomainError("Dirichlet concentration must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Preference r(task_count);
  double sum = 0.0;
  for (double& v : r) {
    v = gamma(rng);
    sum += v;
  }
  if (!(sum > 0.0)) return Preference(task_count, 1.0 / static_cast<double>(task_count));
  for (double& v : r) v /= sum;
  return clamp_to_interior(r);
}

TrainLog train_routers(moe::UpscaledModel& model, const tasks::TaskSuite& suite,
                       const TrainConfig& config) {
  config.validate();
  if (config.mode == Mode::Mgda) throw ConfigError("router training supports ls and epo modes only");
  const std::size_t T = model.task_count();
  if (T != suite.task_count)
    throw DomainError("model has " + std::to_string(T) + " experts but the suite has " +
                      std::to_string(suite.task_count) + " tasks");
  require_same_layout(model.layout(), suite.layout);

  const auto names = model.moe_layer_names();
  const std::set<std::string> selector(names.begin(), names.end());
  Rng rng(derive_seed(config.seed, kRouterStream));
  TrainLog log;
  log.records.reserve(config.steps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    const Preference r = sample_preference(T, config.dirichlet_alpha, rng);
    const ParamVector params = moe::unload_params(model, r);
    std::vector<std::vector<std::size_t>> batches(T);
    for (std::size_t t = 0; t < T; ++t)
      batches[t] = tasks::sample_batch(suite, t, config.batch_size, rng);

    std::vector<nn::GradientReport> reports;
    try {
      reports = evaluate_tasks(suite, params, batches, selector);
    } catch (const NumericError& e) {
      throw TrainingError(std::string(e.what()) + " at step " + std::to_string(step) +
                              " with r = " + describe(r),
                          static_cast<long>(step));
    }
    std::vector<double> losses(T);
    for (std::size_t t = 0; t < T; ++t) losses[t] = reports[t].loss;
    const auto a = aggregation_weights(config.mode, losses, r, config.epo_tol);
    const double aggregate = scalar::ls_scalarize(losses, a);
    if (!std::isfinite(aggregate))
      throw TrainingError("non-finite loss at step " + std::to_string(step) + " with r = " + describe(r),
                          static_cast<long>(step));

    for (auto& layer : model.moe_layers()) {
      std::vector<double> grad_phi(layer.dictionary.rows(), 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        auto g = reports[t].grad.segment(layer.name);
        for (std::size_t k = 0; k < g.size(); ++k) grad_phi[k] += a[t] * g[k];
      }
      const auto grad_w = layer.dictionary.transpose_apply(grad_phi);
      const auto grad_router = moe::route_backward(layer.router, r, grad_w);
      auto flat = layer.router.flat();
      for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= config.lr * grad_router[k];
      layer.router.assign(flat);
    }
    log.records.push_back({step, r, losses, aggregate, safe_non_uniformity(losses, r)});
  }
  return log;
}

JointResult train_joint(const ParamVector& start, const tasks::TaskSuite& suite, Mode mode,
                        std::span<const double> r, const TrainConfig& config) {
  config.validate();
  const std::size_t T = suite.task_count;
  require_same_layout(start.layout(), suite.layout);
  if (mode != Mode::Mgda) {
    if (r.size() != T) throw ShapeError("preference length does not match task count");
    require_simplex(r, true);
  }
  const auto selector = tasks::all_layer_names(suite);
  Rng rng(derive_seed(config.seed, kJointStream));
  JointResult result{start, {}};
  result.log.records.reserve(config.steps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<std::vector<std::size_t>> batches(T);
    for (std::size_t t = 0; t < T; ++t)
      batches[t] = tasks::sample_batch(suite, t, config.batch_size, rng);
    std::vector<nn::GradientReport> reports;
    try {
      reports = evaluate_tasks(suite, result.params, batches, selector);
    } catch (const NumericError& e) {
      throw TrainingError(std::string(e.what()) + " at step " + std::to_string(step),
                          static_cast<long>(step));
    }
    std::vector<double> losses(T);
    for (std::size_t t = 0; t < T; ++t) losses[t] = reports[t].loss;

    std::vector<double> a;
    if (mode == Mode::Mgda) {
      Matrix grads(T, result.params.size());
      for (std::size_t t = 0; t < T; ++t) {
        auto g = reports[t].grad.values();
        std::copy(g.begin(), g.end(), grads.row(t).begin());
      }
      a = scalar::mgda_weights(grads).weights;
    } else {
      a = aggregation_weights(mode, losses, r, config.epo_tol);
    }
    const double aggregate = scalar::ls_scalarize(losses, a);
    if (!std::isfinite(aggregate))
      throw TrainingError("training diverged at step " + std::to_string(step),
                          static_cast<long>(step));

    auto p = result.params.values();
    for (std::size_t t = 0; t < T; ++t) {
      auto g = reports[t].grad.values();
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= config.lr * a[t] * g[k];
    }
    const std::span<const double> logged_r = mode == Mode::Mgda ? std::span<const double>(a) : r;
    result.log.records.push_back({step, Preference(logged_r.begin(), logged_r.end()), losses,
                                  aggregate, safe_non_uniformity(losses, logged_r)});
  }
  for (double v : result.params.values())
    if (!std::isfinite(v))
      throw TrainingError("training diverged", static_cast<long>(config.steps - 1));
  return result;
}

}  // namespace pwemoe::train
