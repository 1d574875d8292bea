// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pareto dominance, front extraction, hypervolume and front distances. All
// objective vectors are losses (lower is better).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwemoe/kernels.hpp"
#include "pwemoe/preference.hpp"
#include "pwemoe/pwe_moe.hpp"
#include "pwemoe/tasks.hpp"

namespace pwemoe::pareto {

struct FrontPoint {
  std::optional<Preference> preference;
  std::vector<double> losses;
  std::vector<double> metrics;  // optional per-task scores, higher is better

  bool operator==(const FrontPoint&) const = default;
};

struct SampledFront {
  std::vector<FrontPoint> points;
  std::size_t task_count = 0;
  std::string provenance;
};

/// u <= v componentwise and u != v.
bool dominates(std::span<const double> u, std::span<const double> v);

/// Non-dominated points, duplicates (equal loss vectors) collapsed to the
/// first occurrence, sorted lexicographically by losses.
SampledFront extract_front(std::span<const FrontPoint> points);

/// Same as extract_front but compares negated metrics instead of losses.
SampledFront extract_front_by_metrics(std::span<const FrontPoint> points);

enum class HvMethod { Exact2d, MonteCarlo };

struct HypervolumeResult {
  double value = 0.0;
  double standard_error = 0.0;  // zero for exact2d
};

/// Volume dominated by the front inside the box bounded by `reference`.
/// Every point must dominate the reference (DomainError otherwise). Monte
/// Carlo samples the box [componentwise min of the front, reference].
HypervolumeResult hypervolume(const SampledFront& front, std::span<const double> reference,
                              HvMethod method = HvMethod::Exact2d,
                              std::uint64_t mc_samples = 1000000, std::uint64_t seed = 0,
                              kernels::Exec exec = kernels::default_exec());

/// max over candidate points of the distance to the nearest reference point.
double front_distance(const SampledFront& candidate, const SampledFront& reference);

/// Lattice points of the simplex with denominator resolution - 1, clamped
/// into the interior; lexicographic order with the first coordinate descending.
std::vector<Preference> preference_grid(std::size_t task_count, std::size_t resolution);

struct RoutingRow {
  std::string layer;
  std::size_t expert = 0;
  std::size_t preference_id = 0;
  Preference preference;
  double weight = 0.0;
};

/// One row per (MoE layer, expert, preference).
std::vector<RoutingRow> routing_table(const moe::UpscaledModel& model,
                                      std::span<const Preference> preferences);

/// Loss (and accuracy for classification suites) of parameters on the
/// suite's validation data.
FrontPoint evaluate_point(const tasks::TaskSuite& suite, const ParamVector& params,
                          std::optional<Preference> preference = std::nullopt);

/// Evaluates the up-scaled model at every preference (in parallel).
SampledFront evaluate_front(const moe::UpscaledModel& model, const tasks::TaskSuite& suite,
                            std::span<const Preference> preferences);

/// Reference point strictly dominated by every point of every front:
/// ref_j = max_j + margin * max(max_j - min_j, |max_j|, 1e-9).
std::vector<double> auto_reference(std::span<const SampledFront> fronts, double margin = 0.1);

}  // namespace pwemoe::pareto
