// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// The CLI subcommands as library calls. Every step reads its inputs from and
// writes its outputs to the working directory.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "pwemoe/config.hpp"
#include "pwemoe/pareto.hpp"
#include "pwemoe/trainer.hpp"

namespace pwemoe::pipeline {

inline constexpr const char* kSuiteFile = "suite.json";
inline constexpr const char* kPretrainedFile = "pretrained.ckpt";
inline constexpr const char* kUpscaledFile = "upscaled.ckpt";
inline constexpr const char* kTrainedFile = "upscaled_trained.ckpt";
inline constexpr const char* kTrainLogFile = "trainlog.csv";
inline constexpr const char* kFrontFile = "front.csv";
inline constexpr const char* kRoutingFile = "routing.csv";
inline constexpr const char* kSweepFile = "sweep.csv";
inline constexpr const char* kDistanceFile = "distances.csv";

std::string finetuned_file(std::size_t task);
std::string merged_file(std::string_view method);
std::string baseline_file(train::Mode mode);

class Pipeline {
 public:
  /// `log` may be null (quiet).
  Pipeline(config::ExperimentConfig config, std::ostream* log = nullptr);

  const config::ExperimentConfig& config() const { return config_; }
  const std::filesystem::path& workdir() const { return config_.workdir; }

  void gen_tasks();
  /// All tasks when `task` is empty.
  void finetune(std::optional<std::size_t> task = std::nullopt);
  /// Uses merge.method when `method` is empty.
  void merge(std::optional<std::string> method = std::nullopt);
  void upscale();
  void train_routers();
  void baseline(train::Mode mode);
  /// Defaults to the trained up-scaled model. A plain checkpoint gives a
  /// single point with no preference.
  pareto::SampledFront eval_front(std::optional<std::filesystem::path> model = std::nullopt);
  void dump_routing(std::optional<std::filesystem::path> model = std::nullopt);
  /// Returns the selected task-arithmetic lambda.
  double sweep_lambda();

 private:
  std::filesystem::path at(const std::string& name) const { return config_.workdir / name; }
  std::vector<ParamVector> load_finetuned() const;
  void note(const std::string& line) const;

  config::ExperimentConfig config_;
  tasks::TaskSuite suite_;
  std::ostream* log_;
};

}  // namespace pwemoe::pipeline
