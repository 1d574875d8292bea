// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "pwemoe/error.hpp"

namespace pwemoe::pareto {

namespace {

std::string describe(std::span<const double> v) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ")";
  return os.str();
}

// Sort-and-filter: after lexicographic sorting a point can only be dominated
// by an earlier one, and by transitivity checking the kept points suffices.
template <typename Key>
SampledFront extract_by(std::span<const FrontPoint> points, Key key) {
  SampledFront front;
  front.task_count = points.empty() ? 0 : points.front().losses.size();
  std::vector<std::vector<double>> keys;
  keys.reserve(points.size());
  for (const auto& p : points) keys.push_back(key(p));
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    if (!kept.empty() && keys[kept.back()] == keys[i]) continue;  // duplicate
    bool dominated = false;
    for (std::size_t k : kept)
      if (dominates(keys[k], keys[i])) {
        dominated = true;
        break;
      }
    if (!dominated) kept.push_back(i);
  }
  for (std::size_t k : kept) front.points.push_back(points[k]);
  return front;
}

}  // namespace

bool dominates(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw ShapeError("objective vectors of length " + std::to_string(u.size()) + " and " +
                     std::to_string(v.size()) + " cannot be compared");
  bool strictly = false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > v[i]) return false;
    if (u[i] < v[i]) strictly = true;
  }
  return strictly;
}

SampledFront extract_front(std::span<const FrontPoint> points) {
  return extract_by(points, [](const FrontPoint& p) { return p.losses; });
}

SampledFront extract_front_by_metrics(std::span<const FrontPoint> points) {
  return extract_by(points, [](const FrontPoint& p) {
    std::vector<double> k(p.metrics.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = -p.metrics[i];
    return k;
  });
}

HypervolumeResult hypervolume(const SampledFront& front, std::span<const double> reference,
                              HvMethod method, std::uint64_t mc_samples, std::uint64_t seed,
                              kernels::Exec exec) {
  if (front.points.empty()) return {};
  const std::size_t d = reference.size();
  for (const auto& p : front.points) {
    if (p.losses.size() != d) throw ShapeError("front point length does not match reference point");
    if (!dominates(p.losses, reference))
      throw DomainError("front point " + describe(p.losses) + " does not dominate reference " +
                        describe(reference));
  }
  if (method == HvMethod::Exact2d) {
    if (d != 2) throw DomainError("exact hypervolume is implemented for two objectives only");
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : front.points) pts.emplace_back(p.losses[0], p.losses[1]);
    std::sort(pts.begin(), pts.end());
    double best_y = reference[1];
    double area = 0.0;
    for (const auto& [x, y] : pts) {
      if (y < best_y) {
        area += (reference[0] - x) * (best_y - y);
        best_y = y;
      }
    }
    return {area, 0.0};
  }
  if (mc_samples == 0) throw DomainError("Monte Carlo hypervolume needs samples");
  Matrix pts(front.points.size(), d);
  std::vector<double> lower(d, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < front.points.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) {
      pts(i, j) = front.points[i].losses[j];
      lower[j] = std::min(lower[j], pts(i, j));
    }
  double volume = 1.0;
  for (std::size_t j = 0; j < d; ++j) volume *= reference[j] - lower[j];
  const auto hits = kernels::mc_dominated_count(pts, lower, reference, mc_samples, seed, exec);
  const double n = static_cast<double>(mc_samples);
  const double frac = static_cast<double>(hits) / n;
  return {frac * volume, volume * std::sqrt(frac * (1.0 - frac) / n)};
}

double front_distance(const SampledFront& candidate, const SampledFront& reference) {
  if (candidate.points.empty() || reference.points.empty())
    throw DomainError("front distance needs two nonempty fronts");
  double worst = 0.0;
  for (const auto& c : candidate.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : reference.points) {
      if (r.losses.size() != c.losses.size()) throw ShapeError("fronts have different task counts");
      double acc = 0.0;
      for (std::size_t j = 0; j < c.losses.size(); ++j) {
        const double diff = c.losses[j] - r.losses[j];
        acc += diff * diff;
      }
      best = std::min(best, acc);
    }
    worst = std::max(worst, std::sqrt(best));
  }
  return worst;
}

std::vector<Preference> preference_grid(std::size_t task_count, std::size_t resolution) {
  if (task_count < 2) throw DomainError("preference grid needs at least two tasks");
  if (resolution < 2) throw DomainError("preference grid resolution must be >= 2");
  const std::size_t n = resolution - 1;
  std::vector<Preference> out;
  std::vector<std::size_t> parts(task_count, 0);
  auto recurse = [&](auto&& self, std::size_t index, std::size_t remaining) -> void {
    if (index + 1 == task_count) {
      parts[index] = remaining;
      Preference r(task_count);
      for (std::size_t t = 0; t < task_count; ++t)
        r[t] = static_cast<double>(parts[t]) / static_cast<double>(n);
      out.push_back(clamp_to_interior(r));
      return;
    }
    for (std::size_t k = remaining + 1; k-- > 0;) {
      parts[index] = k;
      self(self, index + 1, remaining - k);
    }
  };
  recurse(recurse, 0, n);
  return out;
}

std::vector<RoutingRow> routing_table(const moe::UpscaledModel& model,
                                      std::span<const Preference> preferences) {
  std::vector<RoutingRow> rows;
  for (const auto& layer : model.moe_layers()) {
    for (std::size_t p = 0; p < preferences.size(); ++p) {
      const auto w = moe::route(layer.router, preferences[p]);
      for (std::size_t e = 0; e < w.size(); ++e)
        rows.push_back({layer.name, e, p, preferences[p], w[e]});
    }
  }
  return rows;
}

FrontPoint evaluate_point(const tasks::TaskSuite& suite, const ParamVector& params,
                          std::optional<Preference> preference) {
  FrontPoint point{std::move(preference), {}, {}};
  for (std::size_t t = 0; t < suite.task_count; ++t) {
    point.losses.push_back(tasks::task_loss(suite, params, t, tasks::Split::Validation));
    if (suite.kind == tasks::SuiteKind::ClusterClassification)
      point.metrics.push_back(tasks::task_accuracy(suite, params, t, tasks::Split::Validation));
  }
  return point;
}

SampledFront evaluate_front(const moe::UpscaledModel& model, const tasks::TaskSuite& suite,
                            std::span<const Preference> preferences) {
  SampledFront front;
  front.task_count = suite.task_count;
  front.points.resize(preferences.size());
  std::vector<std::exception_ptr> errors(preferences.size());
  const long n = static_cast<long>(preferences.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      front.points[k] = evaluate_point(suite, moe::unload_params(model, preferences[k]), preferences[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return front;
}

std::vector<double> auto_reference(std::span<const SampledFront> fronts, double margin) {
  std::vector<double> hi;
  std::vector<double> lo;
  for (const auto& f : fronts)
    for (const auto& p : f.points) {
      if (hi.empty()) {
        hi = lo = p.losses;
        continue;
      }
      for (std::size_t j = 0; j < hi.size(); ++j) {
        hi[j] = std::max(hi[j], p.losses[j]);
        lo[j] = std::min(lo[j], p.losses[j]);
      }
    }
  if (hi.empty()) throw DomainError("cannot derive a reference point from empty fronts");
  for (std::size_t j = 0; j < hi.size(); ++j)
    hi[j] += margin * std::max({hi[j] - lo[j], std::abs(hi[j]), 1e-9});
  return hi;
}

}  // namespace pwemoe::pareto
