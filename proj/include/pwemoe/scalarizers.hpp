// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ways of combining T task losses (or gradients) into one descent signal.

#pragma once

#include <span>
#include <vector>

#include "pwemoe/matrix.hpp"

namespace pwemoe::scalar {

inline constexpr double kDefaultEpoTolerance = 1e-3;
inline constexpr double kEpoFloor = 1e-12;
inline constexpr double kFrankWolfeGap = 1e-8;
inline constexpr int kFrankWolfeMaxIterations = 10000;

/// sum_t r_t l_t.
double ls_scalarize(std::span<const double> losses, std::span<const double> r);

/// KL divergence between l_hat = r*l / sum(r*l) and the uniform distribution.
/// Throws DomainError when sum(r*l) is not positive.
double non_uniformity(std::span<const double> losses, std::span<const double> r);

/// Simplex weights for one EPO step. Returns r itself when the non-uniformity
/// is within `tol`; otherwise weights proportional to
/// max(0, r_j (ln(T l_hat_j) - mu)) + 1e-12, which descend the objectives
/// whose weighted loss is above its fair share.
std::vector<double> epo_step_weights(std::span<const double> losses, std::span<const double> r,
                                     double tol = kDefaultEpoTolerance);

struct MinNormResult {
  std::vector<double> weights;
  double norm_squared = 0.0;
  int iterations = 0;
};

/// Min-norm point of the convex hull of the gradient rows (MGDA). T = 2 uses
/// the closed form; larger T runs away-step Frank-Wolfe with exact line search until the
/// duality gap is <= 1e-8.
MinNormResult mgda_weights(const Matrix& gradients);

/// Frank-Wolfe for any T >= 2 (exposed so the closed form can be checked
/// against it).
MinNormResult frank_wolfe_min_norm(const Matrix& gradients, double gap_tol = kFrankWolfeGap,
                                   int max_iterations = kFrankWolfeMaxIterations);

}  // namespace pwemoe::scalar
