// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP variant; both produce bit-identical results because each output
// element is reduced by exactly one thread in a fixed order. Output matrices
// must be sized by the caller.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "pwemoe/matrix.hpp"

namespace pwemoe::kernels {

enum class Exec { Serial, Parallel };

/// Execution policy used by library code that does not pass one explicitly.
Exec default_exec();
void set_default_exec(Exec exec);

/// Z[n, o] = sum_i X[n, i] * A[o, i] + A[o, in] where A is the augmented
/// out x (in + 1) matrix [W | b].
void dense_forward_serial(std::span<const double> augmented, const Matrix& x, Matrix& z);
void dense_forward_omp(std::span<const double> augmented, const Matrix& x, Matrix& z);
void dense_forward(std::span<const double> augmented, const Matrix& x, Matrix& z,
                   Exec exec = default_exec());

/// grad[o, i] += sum_n dZ[n, o] * X[n, i] * scale, grad[o, in] += sum_n dZ[n, o] * scale.
void dense_grad_weights_serial(const Matrix& dz, const Matrix& x, double scale,
                               std::span<double> grad);
void dense_grad_weights_omp(const Matrix& dz, const Matrix& x, double scale,
                            std::span<double> grad);
void dense_grad_weights(const Matrix& dz, const Matrix& x, double scale, std::span<double> grad,
                        Exec exec = default_exec());

/// dX[n, i] = sum_o dZ[n, o] * A[o, i].
void dense_grad_input_serial(std::span<const double> augmented, const Matrix& dz, Matrix& dx);
void dense_grad_input_omp(std::span<const double> augmented, const Matrix& dz, Matrix& dx);
void dense_grad_input(std::span<const double> augmented, const Matrix& dz, Matrix& dx,
                      Exec exec = default_exec());

/// Number of uniform samples in the box [lower, reference] that are dominated
/// (weakly, componentwise <=) by at least one row of `front`. Sample k is
/// drawn from a counter-based stream keyed by (seed, k), so the count does not
/// depend on thread scheduling.
std::uint64_t mc_dominated_count_serial(const Matrix& front, std::span<const double> lower,
                                        std::span<const double> reference,
                                        std::uint64_t samples, std::uint64_t seed);
std::uint64_t mc_dominated_count_omp(const Matrix& front, std::span<const double> lower,
                                     std::span<const double> reference, std::uint64_t samples,
                                     std::uint64_t seed);
std::uint64_t mc_dominated_count(const Matrix& front, std::span<const double> lower,
                                 std::span<const double> reference, std::uint64_t samples,
                                 std::uint64_t seed, Exec exec = default_exec());

/// Pairwise Euclidean distances between the rows of `points`.
Matrix pairwise_distances_serial(const Matrix& points);
Matrix pairwise_distances_omp(const Matrix& points);
Matrix pairwise_distances(const Matrix& points, Exec exec = default_exec());

}  // namespace pwemoe::kernels
