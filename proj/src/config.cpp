// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pwemoe/csv.hpp"
#include "pwemoe/error.hpp"
#include "pwemoe/merge.hpp"

namespace pwemoe::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Each parser throws std::invalid_argument with a short reason.
std::uint64_t parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("expected a non-negative integer");
  return v;
}

double parse_real(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw std::invalid_argument("expected a finite number");
  return v;
}

std::vector<double> parse_reals(std::string_view s) {
  std::vector<double> out;
  for (auto part : split(s, ',')) out.push_back(parse_real(part));
  return out;
}

bool is_auto(std::string_view s) { return s == "auto"; }

std::string join_reals(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += io::format_number(values[i]);
  }
  return out;
}

struct Key {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
std::string opt_str(const std::optional<T>& v, std::function<std::string(const T&)> f) {
  return v ? f(*v) : std::string("auto");
}

std::string num(double v) { return io::format_number(v); }

const std::map<std::string, Key, std::less<>>& keys() {
  using C = ExperimentConfig;
  static const std::map<std::string, Key, std::less<>> table = {
      {"suite.kind",
       {[](C& c, std::string_view v) {
          try {
            c.suite.kind = tasks::suite_kind_from_string(v);
          } catch (const Error&) {
            throw std::invalid_argument("expected quadratic or cluster");
          }
        },
        [](const C& c) { return c.suite.kind ? std::string(tasks::to_string(*c.suite.kind)) : ""; }}},
      {"suite.T", {[](C& c, std::string_view v) { c.suite.task_count = parse_uint(v); },
                   [](const C& c) { return c.suite.task_count ? std::to_string(*c.suite.task_count) : ""; }}},
      {"suite.dim", {[](C& c, std::string_view v) { c.suite.dim = parse_uint(v); },
                     [](const C& c) { return std::to_string(c.suite.dim); }}},
      {"suite.seed", {[](C& c, std::string_view v) { c.suite.seed = parse_uint(v); },
                      [](const C& c) { return std::to_string(c.suite.seed); }}},
      {"suite.centers",
       {[](C& c, std::string_view v) {
          c.suite.centers.clear();
          if (is_auto(v)) return;
          for (auto row : split(v, ';')) c.suite.centers.push_back(parse_reals(row));
        },
        [](const C& c) {
          if (c.suite.centers.empty()) return std::string("auto");
          std::string out;
          for (std::size_t i = 0; i < c.suite.centers.size(); ++i) {
            if (i) out += ';';
            out += join_reals(c.suite.centers[i]);
          }
          return out;
        }}},
      {"suite.segments", {[](C& c, std::string_view v) { c.suite.segments = parse_uint(v); },
                          [](const C& c) { return std::to_string(c.suite.segments); }}},
      {"suite.n_per_task", {[](C& c, std::string_view v) { c.suite.cluster.n_per_task = parse_uint(v); },
                            [](const C& c) { return std::to_string(c.suite.cluster.n_per_task); }}},
      {"suite.validation_per_task",
       {[](C& c, std::string_view v) { c.suite.cluster.validation_per_task = parse_uint(v); },
        [](const C& c) { return std::to_string(c.suite.cluster.validation_per_task); }}},
      {"suite.separation", {[](C& c, std::string_view v) { c.suite.cluster.separation = parse_real(v); },
                            [](const C& c) { return num(c.suite.cluster.separation); }}},
      {"suite.hidden", {[](C& c, std::string_view v) { c.suite.cluster.hidden = parse_uint(v); },
                        [](const C& c) { return std::to_string(c.suite.cluster.hidden); }}},
      {"suite.pretrain_steps",
       {[](C& c, std::string_view v) {
          c.suite.pretrain_steps = is_auto(v) ? std::nullopt : std::optional<std::size_t>(parse_uint(v));
        },
        [](const C& c) {
          return opt_str<std::size_t>(c.suite.pretrain_steps,
                                      [](const std::size_t& s) { return std::to_string(s); });
        }}},
      {"suite.pretrain_lr",
       {[](C& c, std::string_view v) {
          c.suite.pretrain_lr = is_auto(v) ? std::nullopt : std::optional(parse_real(v));
        },
        [](const C& c) { return opt_str<double>(c.suite.pretrain_lr, num); }}},
      {"suite.finetune_steps",
       {[](C& c, std::string_view v) {
          c.suite.finetune_steps = is_auto(v) ? std::nullopt : std::optional<std::size_t>(parse_uint(v));
        },
        [](const C& c) {
          return opt_str<std::size_t>(c.suite.finetune_steps,
                                      [](const std::size_t& s) { return std::to_string(s); });
        }}},
      {"suite.finetune_lr",
       {[](C& c, std::string_view v) {
          c.suite.finetune_lr = is_auto(v) ? std::nullopt : std::optional(parse_real(v));
        },
        [](const C& c) { return opt_str<double>(c.suite.finetune_lr, num); }}},
      {"suite.finetune_batch", {[](C& c, std::string_view v) { c.suite.finetune_batch = parse_uint(v); },
                                [](const C& c) { return std::to_string(c.suite.finetune_batch); }}},
      {"train.steps", {[](C& c, std::string_view v) { c.train.steps = parse_uint(v); },
                       [](const C& c) { return std::to_string(c.train.steps); }}},
      {"train.lr", {[](C& c, std::string_view v) { c.train.lr = parse_real(v); },
                    [](const C& c) { return num(c.train.lr); }}},
      {"train.batch_size", {[](C& c, std::string_view v) { c.train.batch_size = parse_uint(v); },
                            [](const C& c) { return std::to_string(c.train.batch_size); }}},
      {"train.mode",
       {[](C& c, std::string_view v) {
          try {
            c.train.mode = train::mode_from_string(v);
          } catch (const Error&) {
            throw std::invalid_argument("expected ls, epo or mgda");
          }
        },
        [](const C& c) { return std::string(train::to_string(c.train.mode)); }}},
      {"train.dirichlet_alpha", {[](C& c, std::string_view v) { c.train.dirichlet_alpha = parse_real(v); },
                                 [](const C& c) { return num(c.train.dirichlet_alpha); }}},
      {"train.seed", {[](C& c, std::string_view v) { c.train.seed = parse_uint(v); },
                      [](const C& c) { return std::to_string(c.train.seed); }}},
      {"train.epo_tol", {[](C& c, std::string_view v) { c.train.epo_tol = parse_real(v); },
                         [](const C& c) { return num(c.train.epo_tol); }}},
      {"merge.method",
       {[](C& c, std::string_view v) {
          static const std::set<std::string, std::less<>> methods = {
              "average", "task-arithmetic", "ties", "fisher", "regmean"};
          if (!methods.contains(v))
            throw std::invalid_argument("expected average, task-arithmetic, ties, fisher or regmean");
          c.merge.method = std::string(v);
        },
        [](const C& c) { return c.merge.method; }}},
      {"merge.lambda",
       {[](C& c, std::string_view v) {
          c.merge.lambda = is_auto(v) ? std::nullopt : std::optional(parse_real(v));
        },
        [](const C& c) { return opt_str<double>(c.merge.lambda, num); }}},
      {"merge.trim_fraction",
       {[](C& c, std::string_view v) {
          const double f = parse_real(v);
          if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("expected a value in (0, 1]");
          c.merge.trim_fraction = f;
        },
        [](const C& c) { return num(c.merge.trim_fraction); }}},
      {"merge.fisher_samples", {[](C& c, std::string_view v) { c.merge.fisher_samples = parse_uint(v); },
                                [](const C& c) { return std::to_string(c.merge.fisher_samples); }}},
      {"upscale.strategy",
       {[](C& c, std::string_view v) {
          if (v != "all-layers" && v != "odd-layers-only")
            throw std::invalid_argument("expected all-layers or odd-layers-only");
          c.upscale.strategy = std::string(v);
        },
        [](const C& c) { return c.upscale.strategy; }}},
      {"upscale.lambda", {[](C& c, std::string_view v) { c.upscale.lambda = parse_real(v); },
                          [](const C& c) { return num(c.upscale.lambda); }}},
      {"upscale.seed", {[](C& c, std::string_view v) { c.upscale.seed = parse_uint(v); },
                        [](const C& c) { return std::to_string(c.upscale.seed); }}},
      {"eval.grid_resolution",
       {[](C& c, std::string_view v) {
          const auto n = parse_uint(v);
          if (n < 2) throw std::invalid_argument("expected at least 2");
          c.eval.grid_resolution = n;
        },
        [](const C& c) { return std::to_string(c.eval.grid_resolution); }}},
      {"eval.hv_reference",
       {[](C& c, std::string_view v) {
          c.eval.hv_reference = is_auto(v) ? std::vector<double>{} : parse_reals(v);
        },
        [](const C& c) {
          return c.eval.hv_reference.empty() ? std::string("auto") : join_reals(c.eval.hv_reference);
        }}},
      {"eval.mc_samples",
       {[](C& c, std::string_view v) {
          const auto n = parse_uint(v);
          if (n == 0) throw std::invalid_argument("expected at least 1");
          c.eval.mc_samples = n;
        },
        [](const C& c) { return std::to_string(c.eval.mc_samples); }}},
      {"eval.seed", {[](C& c, std::string_view v) { c.eval.seed = parse_uint(v); },
                     [](const C& c) { return std::to_string(c.eval.seed); }}},
      {"paths.workdir", {[](C& c, std::string_view v) { c.workdir = std::string(v); },
                         [](const C& c) { return c.workdir.string(); }}},
  };
  return table;
}

class Collector {
 public:
  void add(std::string message) { problems_.push_back(std::move(message)); }

  void apply(ExperimentConfig& c, const std::string& key, std::string_view value,
             const std::string& where) {
    const auto it = keys().find(key);
    if (it == keys().end()) {
      add(where + "unknown key '" + key + "'");
      return;
    }
    try {
      it->second.set(c, value);
    } catch (const std::invalid_argument& e) {
      add(where + "bad value '" + std::string(value) + "' for '" + key + "': " + e.what());
    }
  }

  void throw_if_any() const {
    if (problems_.empty()) return;
    std::string msg = "invalid configuration (" + std::to_string(problems_.size()) + " problem" +
                      (problems_.size() == 1 ? "" : "s") + "):";
    for (const auto& p : problems_) msg += "\n  " + p;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> problems_;
};

void check(const ExperimentConfig& c, Collector& out) {
  const auto& s = c.suite;
  if (!s.kind) out.add("missing required key 'suite.kind'");
  if (!s.task_count) out.add("missing required key 'suite.T'");
  else if (*s.task_count < 2) out.add("'suite.T' must be at least 2");
  if (s.kind == tasks::SuiteKind::Quadratic && s.task_count) {
    const std::size_t T = *s.task_count;
    if (s.dim == 0) out.add("'suite.dim' must be at least 1");
    if (s.segments == 0 || (s.dim && s.dim % s.segments != 0))
      out.add("'suite.segments' must divide 'suite.dim'");
    if (s.centers.empty()) {
      if (s.dim < T) out.add("'suite.centers' is required when suite.dim < suite.T");
    } else {
      if (s.centers.size() != T) out.add("'suite.centers' must list suite.T centers");
      for (const auto& row : s.centers)
        if (row.size() != s.dim) {
          out.add("every center in 'suite.centers' needs suite.dim coordinates");
          break;
        }
    }
  }
  if (s.kind == tasks::SuiteKind::ClusterClassification) {
    if (s.cluster.n_per_task < 32) out.add("'suite.n_per_task' must be at least 32");
    if (s.cluster.validation_per_task < 32) out.add("'suite.validation_per_task' must be at least 32");
    if (s.cluster.hidden == 0) out.add("'suite.hidden' must be at least 1");
    if (!(s.cluster.separation > 0.0)) out.add("'suite.separation' must be > 0");
  }
  if (s.pretrain_lr && !(*s.pretrain_lr > 0.0)) out.add("'suite.pretrain_lr' must be > 0");
  if (s.finetune_lr && !(*s.finetune_lr > 0.0)) out.add("'suite.finetune_lr' must be > 0");
  if (c.train.steps == 0) out.add("'train.steps' must be at least 1");
  if (!(c.train.lr > 0.0)) out.add("'train.lr' must be > 0");
  if (!(c.train.dirichlet_alpha > 0.0)) out.add("'train.dirichlet_alpha' must be > 0");
  if (!(c.train.epo_tol > 0.0)) out.add("'train.epo_tol' must be > 0");
  if (c.merge.method == "fisher" && c.merge.fisher_samples == 0)
    out.add("'merge.fisher_samples' must be at least 1");
  if (!c.eval.hv_reference.empty() && s.task_count && c.eval.hv_reference.size() != *s.task_count)
    out.add("'eval.hv_reference' must have suite.T coordinates");
}

}  // namespace

tasks::TaskSuite ExperimentConfig::make_suite() const {
  const std::size_t T = *suite.task_count;
  if (*suite.kind == tasks::SuiteKind::ClusterClassification)
    return tasks::gen_cluster_classification(T, suite.seed, suite.cluster);
  auto centers = suite.centers;
  if (centers.empty()) {
    centers.assign(T, std::vector<double>(suite.dim, 0.0));
    for (std::size_t t = 0; t < T; ++t) centers[t][t] = 1.0;
  }
  auto s = tasks::gen_quadratic_suite(T, suite.dim, std::move(centers), suite.segments);
  s.seed = suite.seed;
  return s;
}

tasks::SgdOptions ExperimentConfig::pretrain_options() const {
  const bool quad = *suite.kind == tasks::SuiteKind::Quadratic;
  tasks::SgdOptions o;
  // A fully converged quadratic base sits at the centroid, where every task
  // vector sum vanishes and lambda sweeps go flat.
  o.steps = suite.pretrain_steps.value_or(quad ? 5 : 500);
  o.lr = suite.pretrain_lr.value_or(quad ? 0.1 : 0.5);
  o.batch_size = 0;
  o.seed = suite.seed;
  return o;
}

tasks::SgdOptions ExperimentConfig::finetune_options() const {
  const bool quad = *suite.kind == tasks::SuiteKind::Quadratic;
  tasks::SgdOptions o;
  o.steps = suite.finetune_steps.value_or(quad ? 500 : 300);
  o.lr = suite.finetune_lr.value_or(pretrain_options().lr);
  o.batch_size = suite.finetune_batch;
  o.seed = suite.seed;
  return o;
}

double ExperimentConfig::merge_lambda(std::string_view method) const {
  if (merge.lambda) return *merge.lambda;
  return method == "ties" ? merge::kDefaultTiesLambda : merge::kDefaultTaskArithmeticLambda;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [name, key] : keys()) {
    if (name == "paths.workdir") continue;
    out += name + " = " + key.get(*this) + "\n";
  }
  return out;
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig parse_config(std::string_view text, std::span<const std::string> overrides) {
  ExperimentConfig c;
  Collector problems;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        problems.add(where + "malformed section header '" + std::string(line) + "'");
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      problems.add(where + "expected 'key = value', got '" + std::string(line) + "'");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      problems.add(where + "empty key");
      continue;
    }
    if (section.empty()) {
      problems.add(where + "key '" + std::string(key) + "' appears before any [section]");
      continue;
    }
    const std::string full = section + "." + std::string(key);
    if (!seen.insert(full).second) {
      problems.add(where + "duplicate key '" + full + "'");
      continue;
    }
    problems.apply(c, full, value, where);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      problems.add("--set '" + o + "': expected section.key=value");
      continue;
    }
    const std::string key(trim(std::string_view(o).substr(0, eq)));
    problems.apply(c, key, trim(std::string_view(o).substr(eq + 1)), "--set: ");
  }
  check(c, problems);
  problems.throw_if_any();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), overrides);
}

}  // namespace pwemoe::config
