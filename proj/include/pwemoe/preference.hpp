// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace pwemoe {

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kPreferenceFloor = 1e-9;

/// Point on the (T-1)-simplex expressing relative task importance.
using Preference = std::vector<double>;

/// Throws DomainError unless every entry is finite and >= 0 (> 0 when
/// `strictly_positive`) and the entries sum to 1 within kSimplexTolerance.
void require_simplex(std::span<const double> r, bool strictly_positive = false);

bool on_simplex(std::span<const double> r, bool strictly_positive = false);

/// Clamps entries to at least kPreferenceFloor and renormalizes.
Preference clamp_to_interior(std::span<const double> r);

/// Unit preference e_i clamped into the interior.
Preference unit_preference(std::size_t task_count, std::size_t i);

}  // namespace pwemoe
