// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: INI-style sections of `key = value` lines. The
// grammar is in docs/config.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwemoe/tasks.hpp"
#include "pwemoe/trainer.hpp"

namespace pwemoe::config {

struct SuiteSection {
  std::optional<tasks::SuiteKind> kind;  // required
  std::optional<std::size_t> task_count;  // required, key "T"
  std::size_t dim = 2;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> centers;  // empty: unit vectors
  std::size_t segments = 1;
  tasks::ClusterOptions cluster;
  std::optional<std::size_t> pretrain_steps;  // unset: 5 quadratic, 500 cluster
  std::optional<double> pretrain_lr;  // unset: 0.1 quadratic, 0.5 cluster
  std::optional<std::size_t> finetune_steps;  // unset: 500 quadratic, 300 cluster
  std::optional<double> finetune_lr;  // unset: as pretrain_lr
  std::size_t finetune_batch = 0;
};

struct MergeSection {
  std::string method = "task-arithmetic";
  std::optional<double> lambda;  // unset: 0.6 task-arithmetic, 1.0 ties
  double trim_fraction = 0.2;
  std::size_t fisher_samples = 64;
};

struct UpscaleSection {
  std::string strategy = "all-layers";
  double lambda = 0.6;
  std::uint64_t seed = 0;
};

struct EvalSection {
  std::size_t grid_resolution = 11;
  std::vector<double> hv_reference;  // empty: auto
  std::uint64_t mc_samples = 100000;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  SuiteSection suite;
  train::TrainConfig train;
  MergeSection merge;
  UpscaleSection upscale;
  EvalSection eval;
  std::filesystem::path workdir = ".";

  tasks::TaskSuite make_suite() const;
  tasks::SgdOptions pretrain_options() const;
  tasks::SgdOptions finetune_options() const;
  double merge_lambda(std::string_view method) const;

  /// Canonical `section.key = value` listing of every setting except the
  /// working directory.
  std::string canonical() const;
  /// FNV-1a of canonical().
  std::uint64_t hash() const;
};

/// Parses config text and applies `overrides` ("section.key=value") on top.
/// Every problem (syntax, unknown keys, bad values, missing required keys) is
/// collected and reported in one ConfigError.
ExperimentConfig parse_config(std::string_view text, std::span<const std::string> overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::span<const std::string> overrides = {});

}  // namespace pwemoe::config
