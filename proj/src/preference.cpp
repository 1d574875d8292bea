// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/preference.hpp"

#include <cmath>
#include <string>

#include "pwemoe/error.hpp"

namespace pwemoe {

bool on_simplex(std::span<const double> r, bool strictly_positive) {
  if (r.empty()) return false;
  double sum = 0.0;
  for (double v : r) {
    if (!std::isfinite(v) || v < 0.0 || (strictly_positive && v <= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= kSimplexTolerance;
}

void require_simplex(std::span<const double> r, bool strictly_positive) {
  if (on_simplex(r, strictly_positive)) return;
  std::string text = "preference (";
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i) text += ", ";
    text += std::to_string(r[i]);
  }
  throw DomainError(text + ") is not on the simplex");
}

Preference clamp_to_interior(std::span<const double> r) {
  Preference out(r.begin(), r.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::max(v, kPreferenceFloor);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

Preference unit_preference(std::size_t task_count, std::size_t i) {
  Preference e(task_count, 0.0);
  e.at(i) = 1.0;
  return clamp_to_interior(e);
}

}  // namespace pwemoe
