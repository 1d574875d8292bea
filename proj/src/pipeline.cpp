// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/pipeline.hpp"

#include <fstream>
#include <json.hpp>

#include "pwemoe/checkpoint.hpp"
#include "pwemoe/csv.hpp"
#include "pwemoe/error.hpp"
#include "pwemoe/merge.hpp"
#include "pwemoe/pwe_moe.hpp"

namespace pwemoe::pipeline {

namespace {

io::Checkpoint load_plain_or_throw(const std::filesystem::path& path) {
  auto ck = io::load_checkpoint(path);
  if (ck.is_upscaled()) throw FileError("'" + path.string() + "' holds an up-scaled model");
  return ck;
}

void write_suite_json(const std::filesystem::path& path, const tasks::TaskSuite& suite,
                      std::uint64_t config_hash) {
  nlohmann::json j;
  j["kind"] = std::string(tasks::to_string(suite.kind));
  j["T"] = suite.task_count;
  j["input_dim"] = suite.input_dim;
  j["seed"] = suite.seed;
  j["parameters"] = suite.layout.total();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& e : suite.layout.entries()) layers.push_back({{"name", e.name}, {"shape", e.shape}});
  j["layers"] = layers;
  if (!suite.centers.empty()) j["centers"] = suite.centers;
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash));
  j["config_hash"] = hash;
  std::ofstream out(path);
  if (!out) throw FileError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

}  // namespace

std::string finetuned_file(std::size_t task) { return "finetuned_" + std::to_string(task) + ".ckpt"; }
std::string merged_file(std::string_view method) { return "merged_" + std::string(method) + ".ckpt"; }
std::string baseline_file(train::Mode mode) {
  return "baseline_" + std::string(train::to_string(mode)) + ".csv";
}

Pipeline::Pipeline(config::ExperimentConfig config, std::ostream* log)
    : config_(std::move(config)), suite_(config_.make_suite()), log_(log) {
  std::filesystem::create_directories(config_.workdir);
}

void Pipeline::note(const std::string& line) const {
  if (log_) *log_ << line << "\n";
}

std::vector<ParamVector> Pipeline::load_finetuned() const {
  std::vector<ParamVector> out;
  for (std::size_t t = 0; t < suite_.task_count; ++t)
    out.push_back(load_plain_or_throw(at(finetuned_file(t))).plain());
  return out;
}

void Pipeline::gen_tasks() {
  write_suite_json(at(kSuiteFile), suite_, config_.hash());
  auto result = tasks::pretrain(suite_, config_.pretrain_options());
  io::save_checkpoint(at(kPretrainedFile),
                      {std::move(result.params), {config_.hash(), config_.suite.seed, "gen-tasks"}});
  note("wrote " + at(kSuiteFile).string() + " and " + at(kPretrainedFile).string() +
       " (pre-training loss " + io::format_number(result.losses.back()) + ")");
}

void Pipeline::finetune(std::optional<std::size_t> task) {
  const auto pretrained = load_plain_or_throw(at(kPretrainedFile)).plain();
  if (task && *task >= suite_.task_count)
    throw DomainError("task index " + std::to_string(*task) + " out of range for " +
                      std::to_string(suite_.task_count) + " tasks");
  for (std::size_t t = 0; t < suite_.task_count; ++t) {
    if (task && *task != t) continue;
    auto result = tasks::finetune(pretrained, suite_, t, config_.finetune_options());
    io::save_checkpoint(at(finetuned_file(t)),
                        {std::move(result.params), {config_.hash(), config_.suite.seed, "finetune"}});
    note("wrote " + at(finetuned_file(t)).string() + " (final training loss " +
         io::format_number(result.losses.back()) + ")");
  }
}

void Pipeline::merge(std::optional<std::string> method) {
  const std::string m = method.value_or(config_.merge.method);
  const auto pretrained = load_plain_or_throw(at(kPretrainedFile)).plain();
  const auto finetuned = load_finetuned();
  const double lambda = config_.merge_lambda(m);
  ParamVector merged;
  if (m == "average") {
    merged = merge::simple_average(finetuned);
  } else if (m == "task-arithmetic") {
    merged = merge::task_arithmetic(pretrained, merge::task_vectors(pretrained, finetuned), lambda);
  } else if (m == "ties") {
    merged = merge::ties_merging(pretrained, merge::task_vectors(pretrained, finetuned),
                                 config_.merge.trim_fraction, lambda);
  } else if (m == "fisher") {
    merged = merge::fisher_merge(finetuned, suite_, config_.merge.fisher_samples).merged;
  } else if (m == "regmean") {
    merged = merge::regmean_merge(finetuned, suite_);
  } else {
    throw ConfigError("unknown merge method '" + m + "'");
  }
  const auto point = pareto::evaluate_point(suite_, merged);
  io::save_checkpoint(at(merged_file(m)), {std::move(merged), {config_.hash(), config_.suite.seed, "merge"}});

  std::vector<std::string> names;
  for (std::size_t t = 0; t < suite_.task_count; ++t) names.push_back("task_" + std::to_string(t));
  const auto distances = merge::param_distance_matrix(finetuned, tasks::all_layer_names(suite_));
  io::write_csv(at(kDistanceFile), io::distance_table(distances, names), io::distance_schema(names));

  std::string losses;
  for (double l : point.losses) losses += " " + io::format_number(l);
  note("wrote " + at(merged_file(m)).string() + " (validation losses" + losses + ")");
}

void Pipeline::upscale() {
  const auto pretrained = load_plain_or_throw(at(kPretrainedFile)).plain();
  const auto finetuned = load_finetuned();
  auto model = moe::upscale(pretrained, finetuned, moe::UpscaleStrategy::preset(config_.upscale.strategy),
                            config_.upscale.lambda, config_.upscale.seed);
  const auto trainable = model.trainable_parameter_count();
  const auto layers = model.moe_layers().size();
  io::save_checkpoint(at(kUpscaledFile), {std::move(model), {config_.hash(), config_.upscale.seed, "upscale"}});
  note("wrote " + at(kUpscaledFile).string() + " (" + std::to_string(layers) + " MoE layers, " +
       std::to_string(trainable) + " trainable parameters)");
}

void Pipeline::train_routers() {
  auto ck = io::load_checkpoint(at(kUpscaledFile));
  auto model = ck.upscaled();
  const auto log = train::train_routers(model, suite_, config_.train);
  io::write_csv(at(kTrainLogFile), io::trainlog_table(log, suite_.task_count),
                io::trainlog_schema(suite_.task_count));
  io::save_checkpoint(at(kTrainedFile),
                      {std::move(model), {config_.hash(), config_.train.seed, "train-routers"}});
  note("wrote " + at(kTrainedFile).string() + " and " + at(kTrainLogFile).string() + " (" +
       std::to_string(log.records.size()) + " steps)");
}

void Pipeline::baseline(train::Mode mode) {
  const auto pretrained = load_plain_or_throw(at(kPretrainedFile)).plain();
  pareto::SampledFront front;
  front.task_count = suite_.task_count;
  front.provenance = "baseline-" + std::string(train::to_string(mode));
  if (mode == train::Mode::Mgda) {
    const Preference uniform(suite_.task_count, 1.0 / static_cast<double>(suite_.task_count));
    const auto result = train::train_joint(pretrained, suite_, mode, uniform, config_.train);
    front.points.push_back(pareto::evaluate_point(suite_, result.params));
  } else {
    for (const auto& r : pareto::preference_grid(suite_.task_count, config_.eval.grid_resolution)) {
      const auto result = train::train_joint(pretrained, suite_, mode, r, config_.train);
      front.points.push_back(pareto::evaluate_point(suite_, result.params, r));
    }
  }
  const auto table = io::front_table(front);
  io::write_csv(at(baseline_file(mode)), table, table.header);
  note("wrote " + at(baseline_file(mode)).string() + " (" + std::to_string(front.points.size()) +
       " points)");
}

pareto::SampledFront Pipeline::eval_front(std::optional<std::filesystem::path> model) {
  const auto path = model.value_or(at(kTrainedFile));
  const auto ck = io::load_checkpoint(path);
  pareto::SampledFront front;
  if (ck.is_upscaled()) {
    const auto grid = pareto::preference_grid(suite_.task_count, config_.eval.grid_resolution);
    front = pareto::evaluate_front(ck.upscaled(), suite_, grid);
  } else {
    front.task_count = suite_.task_count;
    front.points.push_back(pareto::evaluate_point(suite_, ck.plain()));
  }
  front.provenance = path.filename().string();
  const auto table = io::front_table(front);
  io::write_csv(at(kFrontFile), table, table.header);

  const std::vector<pareto::SampledFront> fronts = {front};
  const auto ref = config_.eval.hv_reference.empty() ? pareto::auto_reference(fronts)
                                                     : config_.eval.hv_reference;
  const auto nondominated = pareto::extract_front(front.points);
  const auto method = suite_.task_count == 2 ? pareto::HvMethod::Exact2d : pareto::HvMethod::MonteCarlo;
  const auto hv = pareto::hypervolume(nondominated, ref, method, config_.eval.mc_samples, config_.eval.seed);
  std::string ref_text;
  for (double v : ref) ref_text += (ref_text.empty() ? "" : ",") + io::format_number(v);
  note("wrote " + at(kFrontFile).string() + " (" + std::to_string(front.points.size()) + " points, " +
       std::to_string(nondominated.points.size()) + " non-dominated, hypervolume " +
       io::format_number(hv.value) + " at reference " + ref_text + ")");
  return front;
}

void Pipeline::dump_routing(std::optional<std::filesystem::path> model) {
  const auto ck = io::load_checkpoint(model.value_or(at(kTrainedFile)));
  const auto& m = ck.upscaled();
  auto prefs = pareto::preference_grid(suite_.task_count, config_.eval.grid_resolution);
  for (std::size_t t = 0; t < suite_.task_count; ++t) prefs.push_back(unit_preference(suite_.task_count, t));
  const auto rows = pareto::routing_table(m, prefs);
  io::write_csv(at(kRoutingFile), io::routing_csv_table(rows, suite_.task_count),
                io::routing_schema(suite_.task_count));
  note("wrote " + at(kRoutingFile).string() + " (" + std::to_string(rows.size()) + " rows)");
}

double Pipeline::sweep_lambda() {
  const auto pretrained = load_plain_or_throw(at(kPretrainedFile)).plain();
  const auto dictionary = merge::task_vectors(pretrained, load_finetuned());
  std::vector<io::SweepRow> rows;
  for (const std::string method : {"task-arithmetic", "ties"}) {
    for (int k = 0; k <= 10; ++k) {
      const double lambda = k / 10.0;
      const auto merged = method == "ties"
                              ? merge::ties_merging(pretrained, dictionary, config_.merge.trim_fraction, lambda)
                              : merge::task_arithmetic(pretrained, dictionary, lambda);
      auto point = pareto::evaluate_point(suite_, merged);
      double mean = 0.0;
      for (double l : point.losses) mean += l;
      mean /= static_cast<double>(point.losses.size());
      rows.push_back({lambda, method, mean, std::move(point.losses)});
    }
  }
  const auto table = io::sweep_table(rows, suite_.task_count);
  io::write_csv(at(kSweepFile), table, io::sweep_schema(suite_.task_count));
  const double ta = io::select_lambda(table, "task-arithmetic");
  const double ties = io::select_lambda(table, "ties");
  note("wrote " + at(kSweepFile).string());
  note("selected lambda: task-arithmetic " + io::format_number(ta) + ", ties " + io::format_number(ties));
  return ta;
}

}  // namespace pwemoe::pipeline
