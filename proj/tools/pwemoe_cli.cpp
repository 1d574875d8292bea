// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// pwemoe: experiment driver. Exit codes: 0 success, 1 domain/file/numeric
// error, 2 configuration or command-line error.

#include <CLI11.hpp>
#include <iostream>

#include "pwemoe/error.hpp"
#include "pwemoe/pipeline.hpp"

namespace {

using pwemoe::pipeline::Pipeline;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> workdir;
  bool quiet = false;
};

Pipeline make_pipeline(const GlobalOptions& g) {
  std::vector<std::string> overrides = g.sets;
  if (g.seed) {
    const auto s = std::to_string(*g.seed);
    for (const char* key : {"suite.seed", "train.seed", "upscale.seed", "eval.seed"})
      overrides.push_back(std::string(key) + "=" + s);
  }
  if (g.workdir) overrides.push_back("paths.workdir=" + *g.workdir);
  return Pipeline(pwemoe::config::load_config(g.config_path, overrides), g.quiet ? nullptr : &std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pareto set learning by preference-conditioned weight-ensembling MoE"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "experiment config file")->required();
  app.add_option("--set", g.sets, "override, section.key=value (repeatable)");
  app.add_option("--seed", g.seed, "sets suite, train, upscale and eval seeds");
  app.add_option("--workdir", g.workdir, "overrides paths.workdir");
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  std::optional<std::size_t> task;
  std::optional<std::string> method;
  std::optional<std::string> model;
  std::string mode = "ls";

  auto* gen = app.add_subcommand("gen-tasks", "generate the suite and the pre-trained checkpoint");
  auto* ft = app.add_subcommand("finetune", "fine-tune one task (or all)");
  ft->add_option("--task", task, "task index");
  auto* mg = app.add_subcommand("merge", "merge the fine-tuned checkpoints");
  mg->add_option("--method", method, "average, task-arithmetic, ties, fisher or regmean");
  auto* up = app.add_subcommand("upscale", "build the up-scaled MoE model");
  auto* tr = app.add_subcommand("train-routers", "train the routers over random preferences");
  auto* bl = app.add_subcommand("baseline", "train one model per preference by scalarization");
  bl->add_option("--mode", mode, "ls, epo or mgda")->check(CLI::IsMember({"ls", "epo", "mgda"}));
  auto* ev = app.add_subcommand("eval-front", "evaluate a model over the preference grid");
  ev->add_option("--model", model, "checkpoint path (default: the trained up-scaled model)");
  auto* dr = app.add_subcommand("dump-routing", "export routing weights");
  dr->add_option("--model", model, "up-scaled checkpoint path");
  auto* sw = app.add_subcommand("sweep-lambda", "sweep the merge scaling coefficient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto p = make_pipeline(g);
    if (gen->parsed()) p.gen_tasks();
    else if (ft->parsed()) p.finetune(task);
    else if (mg->parsed()) p.merge(method);
    else if (up->parsed()) p.upscale();
    else if (tr->parsed()) p.train_routers();
    else if (bl->parsed()) p.baseline(pwemoe::train::mode_from_string(mode));
    else if (ev->parsed()) p.eval_front(model ? std::optional<std::filesystem::path>(*model) : std::nullopt);
    else if (dr->parsed()) p.dump_routing(model ? std::optional<std::filesystem::path>(*model) : std::nullopt);
    else if (sw->parsed()) p.sweep_lambda();
  } catch (const pwemoe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pwemoe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
