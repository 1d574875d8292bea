// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-file checkpoints:
//
//   bytes 0..7    magic "PWEMOECK"
//   bytes 8..15   header length N, unsigned 64-bit little-endian
//   next N bytes  JSON header (format_version, kind, layout, provenance, ...)
//   remainder     payload, IEEE-754 binary64 little-endian
//
// Plain payload: the parameter vector. Up-scaled payload: the static
// (task-arithmetic) parameters, then per MoE layer its base segment, its T
// task vectors and its router (W1, b1, W2, b2).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "pwemoe/param_vector.hpp"
#include "pwemoe/pwe_moe.hpp"

namespace pwemoe::io {

inline constexpr int kCheckpointFormatVersion = 1;

struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string producer;

  bool operator==(const Provenance&) const = default;
};

struct Checkpoint {
  std::variant<ParamVector, moe::UpscaledModel> content;
  Provenance provenance;

  bool is_upscaled() const { return std::holds_alternative<moe::UpscaledModel>(content); }
  const ParamVector& plain() const;
  const moe::UpscaledModel& upscaled() const;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws FileError on a bad magic, an unsupported version or a truncated payload.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pwemoe::io
