// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Router fine-tuning over sampled preferences, and single-preference joint
// training baselines (LS, EPO, MGDA).

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pwemoe/param_vector.hpp"
#include "pwemoe/preference.hpp"
#include "pwemoe/pwe_moe.hpp"
#include "pwemoe/rng.hpp"
#include "pwemoe/scalarizers.hpp"
#include "pwemoe/tasks.hpp"

namespace pwemoe::train {

enum class Mode { Ls, Epo, Mgda };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);

struct TrainConfig {
  std::size_t steps = 2000;
  double lr = 0.05;
  std::size_t batch_size = 32;
  Mode mode = Mode::Ls;
  double dirichlet_alpha = 1.0;
  std::uint64_t seed = 0;
  double epo_tol = scalar::kDefaultEpoTolerance;

  /// Throws ConfigError on steps == 0, lr <= 0 or alpha <= 0.
  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  Preference r;
  std::vector<double> losses;
  double aggregate = 0.0;
  double non_uniformity = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> records;
};

/// Dirichlet(alpha * 1) draw from normalized Gamma variates, entries clamped
/// to >= 1e-9 and renormalized.
Preference sample_preference(std::size_t task_count, double alpha, Rng& rng);

/// Router fine-tuning. Each step samples r, decodes every MoE layer at r,
/// evaluates each task on a fresh batch, aggregates with LS or EPO weights and
/// takes one gradient step on the routers only. Only router parameters change.
TrainLog train_routers(moe::UpscaledModel& model, const tasks::TaskSuite& suite,
                       const TrainConfig& config);

struct JointResult {
  ParamVector params;
  TrainLog log;
};

/// Full-parameter training from `start` under one composition. `r` is ignored
/// for MGDA; the log's r field records the weights actually applied.
JointResult train_joint(const ParamVector& start, const tasks::TaskSuite& suite, Mode mode,
                        std::span<const double> r, const TrainConfig& config);

}  // namespace pwemoe::train
