// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/scalarizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pwemoe/error.hpp"

namespace pwemoe::scalar {

namespace {

void check_lengths(std::span<const double> l, std::span<const double> r) {
  if (l.size() != r.size())
    throw ShapeError("loss vector length " + std::to_string(l.size()) +
                     " does not match preference length " + std::to_string(r.size()));
}

double dot_rows(const Matrix& g, std::size_t a, std::size_t b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < g.cols(); ++k) acc += g(a, k) * g(b, k);
  return acc;
}

}  // namespace

double ls_scalarize(std::span<const double> losses, std::span<const double> r) {
  check_lengths(losses, r);
  double acc = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) acc += r[t] * losses[t];
  return acc;
}

double non_uniformity(std::span<const double> losses, std::span<const double> r) {
  check_lengths(losses, r);
  const double total = ls_scalarize(losses, r);
  if (!(total > 0.0)) throw DomainError("non-uniformity is undefined when all weighted losses are zero");
  const double T = static_cast<double>(r.size());
  double mu = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double hat = r[i] * losses[i] / total;
    if (hat > 0.0) mu += hat * std::log(T * hat);
  }
  return std::max(mu, 0.0);
}

std::vector<double> epo_step_weights(std::span<const double> losses, std::span<const double> r,
                                     double tol) {
  if (!(tol > 0.0)) throw DomainError("EPO tolerance must be positive");
  const double mu = non_uniformity(losses, r);
  if (mu <= tol) return {r.begin(), r.end()};
  const double T = static_cast<double>(r.size());
  const double total = ls_scalarize(losses, r);
  std::vector<double> a(r.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    const double hat = r[j] * losses[j] / total;
    const double excess = hat > 0.0 ? std::log(T * hat) - mu : -std::numeric_limits<double>::infinity();
    a[j] = std::max(0.0, r[j] * excess) + kEpoFloor;
    sum += a[j];
  }
  for (double& v : a) v /= sum;
  return a;
}

MinNormResult frank_wolfe_min_norm(const Matrix& gradients, double gap_tol, int max_iterations) {
  const std::size_t T = gradients.rows();
  if (T < 2) throw DomainError("min-norm weights need at least two gradients");
  Matrix gram(T, T);
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = a; b < T; ++b) gram(a, b) = gram(b, a) = dot_rows(gradients, a, b);

  std::vector<double> gamma(T, 1.0 / static_cast<double>(T));
  MinNormResult result;
  for (int k = 0; k < max_iterations; ++k) {
    // grad of ||sum gamma_t g_t||^2 / 2 with respect to gamma is gram * gamma.
    std::vector<double> grad(T, 0.0);
    double quad = 0.0;
    for (std::size_t a = 0; a < T; ++a) {
      for (std::size_t b = 0; b < T; ++b) grad[a] += gram(a, b) * gamma[b];
      quad += gamma[a] * grad[a];
    }
    // Toward vertex: smallest gradient entry. Away vertex: largest entry on
    // the support of gamma.
    std::size_t s = 0;
    std::size_t v = T;
    for (std::size_t t = 0; t < T; ++t) {
      if (grad[t] < grad[s]) s = t;
      if (gamma[t] > 0.0 && (v == T || grad[t] > grad[v])) v = t;
    }
    const double gap = quad - grad[s];
    result.iterations = k;
    if (gap <= gap_tol) break;
    const double away_gap = grad[v] - quad;
    if (gap >= away_gap || gamma[v] >= 1.0) {
      // Exact line search along e_s - gamma.
      const double curvature = quad - 2.0 * grad[s] + gram(s, s);
      double step = curvature > 0.0 ? gap / curvature : 2.0 / (k + 2.0);
      step = std::clamp(step, 0.0, 1.0);
      for (std::size_t t = 0; t < T; ++t) gamma[t] *= (1.0 - step);
      gamma[s] += step;
    } else {
      // Exact line search along gamma - e_v, capped where gamma_v hits zero.
      const double max_step = gamma[v] / (1.0 - gamma[v]);
      const double curvature = quad - 2.0 * grad[v] + gram(v, v);
      double step = curvature > 0.0 ? away_gap / curvature : max_step;
      step = std::clamp(step, 0.0, max_step);
      for (std::size_t t = 0; t < T; ++t) gamma[t] *= (1.0 + step);
      gamma[v] -= step;
      if (step == max_step) gamma[v] = 0.0;
    }
  }
  double norm2 = 0.0;
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < T; ++b) norm2 += gamma[a] * gamma[b] * gram(a, b);
  result.weights = std::move(gamma);
  result.norm_squared = std::max(norm2, 0.0);
  return result;
}

MinNormResult mgda_weights(const Matrix& gradients) {
  const std::size_t T = gradients.rows();
  if (T < 2) throw DomainError("min-norm weights need at least two gradients");
  if (T > 2) return frank_wolfe_min_norm(gradients);
  const double g11 = dot_rows(gradients, 0, 0);
  const double g12 = dot_rows(gradients, 0, 1);
  const double g22 = dot_rows(gradients, 1, 1);
  const double denom = g11 - 2.0 * g12 + g22;  // ||g1 - g2||^2
  MinNormResult result;
  if (!(denom > 0.0)) {
    result.weights = {0.5, 0.5};
  } else {
    const double g2 = std::clamp((g11 - g12) / denom, 0.0, 1.0);
    result.weights = {1.0 - g2, g2};
  }
  const double a = result.weights[0];
  const double b = result.weights[1];
  result.norm_squared = std::max(a * a * g11 + 2.0 * a * b * g12 + b * b * g22, 0.0);
  return result;
}

}  // namespace pwemoe::scalar
