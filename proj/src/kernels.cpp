// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/kernels.hpp"

#include <atomic>
#include <cmath>

#include "pwemoe/error.hpp"
#include "pwemoe/rng.hpp"

namespace pwemoe::kernels {

namespace {

std::atomic<Exec> g_default_exec{Exec::Parallel};

void check_forward_shapes(std::span<const double> a, const Matrix& x, const Matrix& z) {
  const std::size_t in = x.cols();
  const std::size_t out = z.cols();
  if (a.size() != out * (in + 1) || z.rows() != x.rows())
    throw ShapeError("dense kernel shape mismatch");
}

inline void forward_row(std::span<const double> a, std::span<const double> xr,
                        std::span<double> zr) {
  const std::size_t in = xr.size();
  for (std::size_t o = 0; o < zr.size(); ++o) {
    const double* w = a.data() + o * (in + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += w[i] * xr[i];
    zr[o] = acc + w[in];
  }
}

inline void grad_weight_row(const Matrix& dz, const Matrix& x, double scale, std::size_t o,
                            std::span<double> grad) {
  const std::size_t in = x.cols();
  double* g = grad.data() + o * (in + 1);
  for (std::size_t i = 0; i < in; ++i) {
    double acc = 0.0;
    for (std::size_t n = 0; n < x.rows(); ++n) acc += dz(n, o) * x(n, i);
    g[i] += acc * scale;
  }
  double acc = 0.0;
  for (std::size_t n = 0; n < x.rows(); ++n) acc += dz(n, o);
  g[in] += acc * scale;
}

inline void grad_input_row(std::span<const double> a, std::span<const double> dzr,
                           std::span<double> dxr) {
  const std::size_t in = dxr.size();
  for (std::size_t i = 0; i < in; ++i) {
    double acc = 0.0;
    for (std::size_t o = 0; o < dzr.size(); ++o) acc += dzr[o] * a[o * (in + 1) + i];
    dxr[i] = acc;
  }
}

inline bool sample_dominated(const Matrix& front, std::span<const double> lower,
                             std::span<const double> reference, std::uint64_t seed,
                             std::uint64_t k) {
  const std::size_t d = reference.size();
  double point[16];
  std::uint64_t state = splitmix64(seed ^ splitmix64(k));
  for (std::size_t j = 0; j < d; ++j) {
    state = splitmix64(state);
    point[j] = lower[j] + unit_double(state) * (reference[j] - lower[j]);
  }
  for (std::size_t p = 0; p < front.rows(); ++p) {
    bool dom = true;
    for (std::size_t j = 0; j < d && dom; ++j) dom = front(p, j) <= point[j];
    if (dom) return true;
  }
  return false;
}

void check_mc_shapes(const Matrix& front, std::span<const double> lower,
                     std::span<const double> reference) {
  if (reference.size() != front.cols() || lower.size() != front.cols())
    throw ShapeError("hypervolume dimension mismatch");
  if (reference.size() > 16) throw ShapeError("Monte Carlo hypervolume supports at most 16 objectives");
}

inline double row_distance(const Matrix& p, std::size_t a, std::size_t b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < p.cols(); ++k) {
    const double d = p(a, k) - p(b, k);
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

Exec default_exec() { return g_default_exec.load(); }
void set_default_exec(Exec exec) { g_default_exec.store(exec); }

void dense_forward_serial(std::span<const double> a, const Matrix& x, Matrix& z) {
  check_forward_shapes(a, x, z);
  for (std::size_t n = 0; n < x.rows(); ++n) forward_row(a, x.row(n), z.row(n));
}

void dense_forward_omp(std::span<const double> a, const Matrix& x, Matrix& z) {
  check_forward_shapes(a, x, z);
  const long rows = static_cast<long>(x.rows());
#pragma omp parallel for schedule(static)
  for (long n = 0; n < rows; ++n) forward_row(a, x.row(n), z.row(n));
}

void dense_forward(std::span<const double> a, const Matrix& x, Matrix& z, Exec exec) {
  exec == Exec::Serial ? dense_forward_serial(a, x, z) : dense_forward_omp(a, x, z);
}

void dense_grad_weights_serial(const Matrix& dz, const Matrix& x, double scale,
                               std::span<double> grad) {
  if (grad.size() != dz.cols() * (x.cols() + 1) || dz.rows() != x.rows())
    throw ShapeError("dense gradient shape mismatch");
  for (std::size_t o = 0; o < dz.cols(); ++o) grad_weight_row(dz, x, scale, o, grad);
}

void dense_grad_weights_omp(const Matrix& dz, const Matrix& x, double scale,
                            std::span<double> grad) {
  if (grad.size() != dz.cols() * (x.cols() + 1) || dz.rows() != x.rows())
    throw ShapeError("dense gradient shape mismatch");
  const long outs = static_cast<long>(dz.cols());
#pragma omp parallel for schedule(static)
  for (long o = 0; o < outs; ++o) grad_weight_row(dz, x, scale, static_cast<std::size_t>(o), grad);
}

void dense_grad_weights(const Matrix& dz, const Matrix& x, double scale, std::span<double> grad,
                        Exec exec) {
  exec == Exec::Serial ? dense_grad_weights_serial(dz, x, scale, grad)
                       : dense_grad_weights_omp(dz, x, scale, grad);
}

void dense_grad_input_serial(std::span<const double> a, const Matrix& dz, Matrix& dx) {
  if (a.size() != dz.cols() * (dx.cols() + 1) || dz.rows() != dx.rows())
    throw ShapeError("dense input-gradient shape mismatch");
  for (std::size_t n = 0; n < dz.rows(); ++n) grad_input_row(a, dz.row(n), dx.row(n));
}

void dense_grad_input_omp(std::span<const double> a, const Matrix& dz, Matrix& dx) {
  if (a.size() != dz.cols() * (dx.cols() + 1) || dz.rows() != dx.rows())
    throw ShapeError("dense input-gradient shape mismatch");
  const long rows = static_cast<long>(dz.rows());
#pragma omp parallel for schedule(static)
  for (long n = 0; n < rows; ++n) grad_input_row(a, dz.row(n), dx.row(n));
}

void dense_grad_input(std::span<const double> a, const Matrix& dz, Matrix& dx, Exec exec) {
  exec == Exec::Serial ? dense_grad_input_serial(a, dz, dx) : dense_grad_input_omp(a, dz, dx);
}

std::uint64_t mc_dominated_count_serial(const Matrix& front, std::span<const double> lower,
                                        std::span<const double> reference,
                                        std::uint64_t samples, std::uint64_t seed) {
  check_mc_shapes(front, lower, reference);
  std::uint64_t hits = 0;
  for (std::uint64_t k = 0; k < samples; ++k)
    hits += sample_dominated(front, lower, reference, seed, k) ? 1 : 0;
  return hits;
}

std::uint64_t mc_dominated_count_omp(const Matrix& front, std::span<const double> lower,
                                     std::span<const double> reference, std::uint64_t samples,
                                     std::uint64_t seed) {
  check_mc_shapes(front, lower, reference);
  std::uint64_t hits = 0;
  const long long n = static_cast<long long>(samples);
#pragma omp parallel for schedule(static) reduction(+ : hits)
  for (long long k = 0; k < n; ++k)
    hits += sample_dominated(front, lower, reference, seed, static_cast<std::uint64_t>(k)) ? 1 : 0;
  return hits;
}

std::uint64_t mc_dominated_count(const Matrix& front, std::span<const double> lower,
                                 std::span<const double> reference, std::uint64_t samples,
                                 std::uint64_t seed, Exec exec) {
  return exec == Exec::Serial ? mc_dominated_count_serial(front, lower, reference, samples, seed)
                              : mc_dominated_count_omp(front, lower, reference, samples, seed);
}

Matrix pairwise_distances_serial(const Matrix& points) {
  Matrix d(points.rows(), points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i)
    for (std::size_t j = i + 1; j < points.rows(); ++j) d(i, j) = d(j, i) = row_distance(points, i, j);
  return d;
}

Matrix pairwise_distances_omp(const Matrix& points) {
  Matrix d(points.rows(), points.rows());
  const long n = static_cast<long>(points.rows());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      const double v = row_distance(points, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

Matrix pairwise_distances(const Matrix& points, Exec exec) {
  return exec == Exec::Serial ? pairwise_distances_serial(points) : pairwise_distances_omp(points);
}

}  // namespace pwemoe::kernels
