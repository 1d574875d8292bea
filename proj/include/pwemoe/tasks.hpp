// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-task suites and the shared/per-task checkpoints trained on
// them.

#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pwemoe/matrix.hpp"
#include "pwemoe/nn.hpp"
#include "pwemoe/param_vector.hpp"
#include "pwemoe/rng.hpp"

namespace pwemoe::tasks {

enum class SuiteKind { Quadratic, ClusterClassification };

std::string_view to_string(SuiteKind kind);
SuiteKind suite_kind_from_string(std::string_view s);

struct Dataset {
  Matrix inputs;   // n x 2
  Matrix targets;  // n x 2, one-hot
  std::vector<int> labels;
};

struct TaskData {
  Dataset train;
  Dataset validation;
};

/// A family of T objectives over one shared parameter layout.
///
/// Quadratic suites realize the parameter vector as the solution itself:
/// task t's loss is ||phi - c_t||^2. Cluster suites realize it as an MLP
/// classifier and task t's loss is its softmax cross-entropy on task t's data.
struct TaskSuite {
  SuiteKind kind = SuiteKind::Quadratic;
  std::size_t task_count = 0;
  std::size_t input_dim = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> centers;  // quadratic only
  std::vector<TaskData> data;                // cluster only
  nn::ArchSpec arch;                         // cluster only
  Layout layout;
};

/// Quadratic suite over a `dim`-dimensional parameter vector split into
/// `segments` raw layers named "seg0", "seg1", ... (dim must divide evenly).
TaskSuite gen_quadratic_suite(std::size_t task_count, std::size_t dim,
                              std::vector<std::vector<double>> centers, std::size_t segments = 1);

struct ClusterOptions {
  std::size_t n_per_task = 256;
  std::size_t validation_per_task = 256;
  double separation = 1.5;  // class-mean offset from the origin
  std::size_t hidden = 16;
};

/// T two-class 2-D Gaussian-cluster tasks. Task t's class means sit at
/// +/- separation * (cos(t*pi/T), sin(t*pi/T)), so its decision boundary is
/// rotated by t*pi/T relative to task 0.
TaskSuite gen_cluster_classification(std::size_t task_count, std::uint64_t seed,
                                     const ClusterOptions& options = {});

enum class Split { Train, Validation };

/// Mean loss of task `task` for parameters `params` over a full split.
double task_loss(const TaskSuite& suite, const ParamVector& params, std::size_t task,
                 Split split = Split::Validation);

/// Fraction of correctly classified samples (cluster suites); quadratic
/// suites have no accuracy and return NaN.
double task_accuracy(const TaskSuite& suite, const ParamVector& params, std::size_t task,
                     Split split = Split::Validation);

/// Task loss and gradient restricted to `selector` on a minibatch. For
/// quadratic suites the minibatch is ignored (the loss is deterministic).
/// `batch_indices` empty means the full training split.
nn::GradientReport task_loss_and_grad(const TaskSuite& suite, const ParamVector& params,
                                      std::size_t task,
                                      std::span<const std::size_t> batch_indices,
                                      const std::set<std::string>& selector);

/// `batch_size` training indices drawn with replacement (empty for quadratic
/// suites or batch_size 0).
std::vector<std::size_t> sample_batch(const TaskSuite& suite, std::size_t task,
                                      std::size_t batch_size, Rng& rng);

/// All layer names of the suite layout.
std::set<std::string> all_layer_names(const TaskSuite& suite);

struct SgdOptions {
  std::size_t steps = 500;
  double lr = 0.1;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
};

struct TrainResult {
  ParamVector params;
  std::vector<double> losses;  // training loss before each step
};

/// Gradient descent on the equal-weight mean of all task losses from a seeded
/// random start.
TrainResult pretrain(const TaskSuite& suite, const SgdOptions& options);

/// Gradient descent on one task's loss starting from `pretrained`.
TrainResult finetune(const ParamVector& pretrained, const TaskSuite& suite, std::size_t task,
                     const SgdOptions& options);

struct CheckpointSet {
  ParamVector pretrained;
  std::vector<ParamVector> finetuned;
  std::uint64_t suite_seed = 0;
  std::size_t steps = 0;
  double lr = 0.0;
};

/// Pretrains once and fine-tunes every task (tasks in parallel).
CheckpointSet build_checkpoints(const TaskSuite& suite, const SgdOptions& pretrain_options,
                                const SgdOptions& finetune_options);

}  // namespace pwemoe::tasks
