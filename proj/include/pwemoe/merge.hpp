// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Task vectors and the classic merge baselines: simple averaging, task
// arithmetic, Ties-Merging, Fisher merging and RegMean.

#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pwemoe/matrix.hpp"
#include "pwemoe/param_vector.hpp"

namespace pwemoe::tasks {
struct TaskSuite;
}

namespace pwemoe::merge {

inline constexpr double kDefaultTaskArithmeticLambda = 0.6;
inline constexpr double kDefaultTiesLambda = 1.0;
inline constexpr double kDefaultTrimFraction = 0.2;
inline constexpr double kFisherEpsilon = 1e-8;

/// Columns tau_i = checkpoint_i - base, stored column-major (one contiguous
/// vector per task) over the base's layout.
class TaskVectorDictionary {
 public:
  TaskVectorDictionary() = default;
  TaskVectorDictionary(ParamVector base, std::vector<std::vector<double>> columns);

  const ParamVector& base() const { return base_; }
  std::size_t task_count() const { return columns_.size(); }
  std::size_t rows() const { return base_.size(); }
  std::span<const double> column(std::size_t t) const { return columns_[t]; }
  const std::vector<std::vector<double>>& columns() const { return columns_; }

  /// base + sum_t w_t * tau_t.
  std::vector<double> decode(std::span<const double> w) const;
  /// D^T g: the gradient with respect to w given the gradient g at the
  /// decoded parameters.
  std::vector<double> transpose_apply(std::span<const double> g) const;

  bool operator==(const TaskVectorDictionary&) const = default;

 private:
  ParamVector base_;
  std::vector<std::vector<double>> columns_;
};

TaskVectorDictionary task_vectors(const ParamVector& base, std::span<const ParamVector> checkpoints);

ParamVector simple_average(std::span<const ParamVector> checkpoints);

/// base + lambda * sum of columns.
ParamVector task_arithmetic(const ParamVector& base, const TaskVectorDictionary& dictionary,
                            double lambda = kDefaultTaskArithmeticLambda);

/// Trim each task vector to its top ceil(k * n) magnitudes, elect a sign per
/// coordinate from the sum of trimmed values (exact zero sum gives 0), average
/// the entries agreeing with the elected sign, and add lambda times the result.
ParamVector ties_merging(const ParamVector& base, const TaskVectorDictionary& dictionary,
                         double trim_fraction = kDefaultTrimFraction,
                         double lambda = kDefaultTiesLambda);

struct FisherMergeResult {
  ParamVector merged;
  std::size_t zero_fisher_coordinates = 0;  // coordinates that fell back to the plain mean
};

/// Coordinate-wise (sum_i F_i * phi_i) / max(sum_i F_i, eps). Coordinates whose
/// Fisher values are all zero use the plain mean.
FisherMergeResult fisher_merge(std::span<const ParamVector> checkpoints,
                               std::span<const std::vector<double>> fishers);

/// Diagonal empirical Fisher: mean over `samples` training examples of the
/// squared per-example loss gradient, evaluated at `params` on task `task`.
std::vector<double> empirical_fisher(const tasks::TaskSuite& suite, const ParamVector& params,
                                     std::size_t task, std::size_t samples);

/// Fisher merge of checkpoint i with the Fisher of task i.
FisherMergeResult fisher_merge(std::span<const ParamVector> checkpoints,
                               const tasks::TaskSuite& suite, std::size_t fisher_samples);

/// Solves (sum G_i + delta I) W^T = sum G_i W_i^T for one linear map y = W x,
/// with delta = 1e-6 * trace(sum G_i) / dim. Weights are out x in, Grams in x in.
Matrix regmean_merge(std::span<const Matrix> weights, std::span<const Matrix> grams);

/// RegMean over a full model: dense segments are merged with Gram matrices of
/// their (bias-augmented) inputs on each model's own task data; raw segments
/// fall back to simple averaging.
ParamVector regmean_merge(std::span<const ParamVector> checkpoints, const tasks::TaskSuite& suite);

/// Entry (i, j) = ||phi_i - phi_j||_2 over the selected layers.
Matrix param_distance_matrix(std::span<const ParamVector> checkpoints,
                             const std::set<std::string>& selector);

}  // namespace pwemoe::merge
