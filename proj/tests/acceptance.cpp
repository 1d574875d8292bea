// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances and budgets are fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "pwemoe/merge.hpp"
#include "pwemoe/pipeline.hpp"
#include "pwemoe/pwe_moe.hpp"
#include "pwemoe/scalarizers.hpp"
#include "pwemoe/tasks.hpp"
#include "pwemoe/trainer.hpp"

using namespace pwemoe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

int failures = 0;

void criterion(const char* name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && secs > budget_seconds) {
    out.pass = false;
    out.detail += fmt(" [over budget %.0fs]", budget_seconds);
  }
  if (!out.pass) ++failures;
  std::printf("%s  %-28s %s  (%.2fs)\n", out.pass ? "PASS" : "FAIL", name, out.detail.c_str(), secs);
  std::fflush(stdout);
}

// ---- gradient oracle -------------------------------------------------------

Outcome gradient_oracle() {
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> width(1, 6), depth(1, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool ce = trial % 2 == 1;
    nn::ArchSpec arch;
    arch.widths.push_back(width(rng));
    const std::size_t hidden = depth(rng) - 1;
    for (std::size_t h = 0; h < hidden; ++h) arch.widths.push_back(width(rng));
    arch.widths.push_back(ce ? 1 + width(rng) : width(rng));
    const auto layout = nn::mlp_layout(arch);
    const auto params = oracle::random_vector(layout.total(), rng, 0.8);
    const auto model = nn::unflatten(params, layout);
    const std::size_t n = 1 + trial % 8;
    const auto x = oracle::random_matrix(n, arch.widths.front(), rng);
    Matrix y = oracle::random_matrix(n, arch.widths.back(), rng);
    if (ce) {
      y = Matrix(n, arch.widths.back());
      std::uniform_int_distribution<std::size_t> c(0, arch.widths.back() - 1);
      for (std::size_t i = 0; i < n; ++i) y(i, c(rng)) = 1.0;
    }
    const auto kind = ce ? nn::LossKind::SoftmaxCrossEntropy : nn::LossKind::Mse;
    const auto report = nn::loss_and_grad(model, {x, y}, kind, nn::all_layers(model));
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& p) { return oracle::naive_loss(nn::unflatten(p, layout), x, y, kind); },
        params);
    double err = 0.0, scale = 1e-8;
    for (std::size_t k = 0; k < fd.size(); ++k) {
      err = std::max(err, std::abs(report.grad.values()[k] - fd[k]));
      scale = std::max(scale, std::abs(fd[k]));
    }
    worst = std::max(worst, err / scale);
  }
  return {worst <= 1e-5, fmt("max relative error %.2e over 100 models (tol 1e-5)", worst)};
}

// ---- dominance -------------------------------------------------------------

Outcome dominance_laws() {
  Rng rng(7);
  std::uniform_int_distribution<int> cell(0, 9);
  std::uniform_int_distribution<std::size_t> dim(1, 3);
  auto point = [&](std::size_t d) {
    std::vector<double> p(d);
    for (double& v : p) v = cell(rng) * 0.1;
    return p;
  };
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = dim(rng);
    const auto a = point(d), b = point(d), c = point(d);
    if (pareto::dominates(a, a)) ++violations;
    if (pareto::dominates(a, b) && pareto::dominates(b, c) && !pareto::dominates(a, c)) ++violations;
  }
  int mismatches = 0;
  std::uniform_int_distribution<std::size_t> count(1, 200);
  for (int set = 0; set < 50; ++set) {
    const std::size_t d = dim(rng);
    std::vector<std::vector<double>> pts(count(rng));
    for (auto& p : pts) p = point(d);
    const auto front = pareto::extract_front(oracle::to_front(pts).points);
    std::vector<std::vector<double>> got, want;
    for (const auto& p : front.points) got.push_back(p.losses);
    for (auto i : oracle::brute_front(pts)) want.push_back(pts[i]);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    if (got != want) ++mismatches;
  }
  return {violations == 0 && mismatches == 0,
          fmt("%d law violations in 1000 instances, %d/50 front mismatches vs O(n^2) oracle", violations,
              mismatches)};
}

// ---- hypervolume -----------------------------------------------------------

Outcome hypervolume_oracle() {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> count(1, 30);
  double worst_grid = 0.0, worst_se = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = count(rng);
    std::vector<double> xs(n), ys(n);
    for (auto& v : xs) v = u(rng);
    for (auto& v : ys) v = u(rng);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end(), std::greater<>());
    std::vector<std::vector<double>> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({xs[i], ys[i]});
    const std::vector<double> ref = {1.0 + 0.5 * u(rng), 1.0 + 0.5 * u(rng)};
    const auto front = oracle::to_front(pts);
    const double exact = pareto::hypervolume(front, ref).value;
    worst_grid = std::max(worst_grid, std::abs(exact - oracle::grid_hypervolume_2d(pts, {0, 0}, ref, 1000)));
    const auto mc = pareto::hypervolume(front, ref, pareto::HvMethod::MonteCarlo, 1000000,
                                        static_cast<std::uint64_t>(trial));
    worst_se = std::max(worst_se, std::abs(mc.value - exact) / mc.standard_error);
  }
  return {worst_grid <= 2e-3 && worst_se <= 3.0,
          fmt("exact vs 1e6-cell grid max diff %.2e (tol 2e-3); Monte Carlo max %.2f SE (tol 3)", worst_grid,
              worst_se)};
}

// ---- shared fixtures -------------------------------------------------------

struct ClusterFixture {
  tasks::TaskSuite suite = tasks::gen_cluster_classification(2, 0);
  tasks::CheckpointSet set = tasks::build_checkpoints(suite, {500, 0.5, 0, 0}, {300, 0.5, 0, 0});
};

const ClusterFixture& cluster_fixture() {
  static const ClusterFixture f;
  return f;
}

struct QuadraticFixture {
  tasks::TaskSuite suite = tasks::gen_quadratic_suite(2, 2, {{1, 0}, {0, 1}});
  tasks::CheckpointSet set = tasks::build_checkpoints(suite, {5, 0.1, 0, 0}, {500, 0.1, 0, 0});
  moe::UpscaledModel model;
  train::TrainLog log;
  QuadraticFixture() {
    model = moe::upscale(set.pretrained, set.finetuned, moe::UpscaleStrategy::all_layers(), 0.6);
    train::TrainConfig cfg;
    cfg.steps = 2000;
    cfg.lr = 0.05;
    log = train::train_routers(model, suite, cfg);
  }
};

const QuadraticFixture& quadratic_fixture() {
  static const QuadraticFixture f;
  return f;
}

// ---- initialization ~ task arithmetic ----------------------------------------

Outcome init_matches_task_arithmetic() {
  const auto& f = cluster_fixture();
  const double lambda = 0.6;
  const auto ta = nn::unflatten(
      merge::task_arithmetic(f.set.pretrained, merge::task_vectors(f.set.pretrained, f.set.finetuned), lambda));
  Rng rng(99);
  const auto x = oracle::random_matrix(64, 2, rng, 2.0);
  const auto ta_out = nn::forward(ta, x);
  double worst_route = 0.0, worst_out = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto m = moe::upscale(f.set.pretrained, f.set.finetuned, moe::UpscaleStrategy::all_layers(), lambda, seed);
    const auto r = oracle::random_simplex(2, rng);
    for (const auto& layer : m.moe_layers())
      for (double w : moe::route(layer.router, r)) worst_route = std::max(worst_route, std::abs(w - lambda));
    const auto out = moe::moe_forward(m, r, x);
    for (std::size_t k = 0; k < out.data().size(); ++k)
      worst_out = std::max(worst_out, std::abs(out.data()[k] - ta_out.data()[k]));
  }
  return {worst_route <= 0.01 && worst_out <= 1e-2,
          fmt("max |route - lambda| %.2e (tol 1e-2), max output diff %.2e (tol 1e-2) over 1000 seeds", worst_route,
              worst_out)};
}

// ---- scalability -------------------------------------------------------------

Outcome scalability() {
  Rng rng(5);
  int bad = 0;
  std::string seen;
  for (std::size_t T : {2u, 3u, 8u}) {
    for (const auto& strategy : {moe::UpscaleStrategy::all_layers(), moe::UpscaleStrategy::odd_layers_only()}) {
      std::size_t first = 0;
      for (std::size_t width : {8u, 64u}) {
        const auto layout = nn::mlp_layout({{2, width, width, width, 2}});
        const ParamVector base(layout, oracle::random_vector(layout.total(), rng));
        std::vector<ParamVector> ck;
        for (std::size_t t = 0; t < T; ++t) ck.emplace_back(layout, oracle::random_vector(layout.total(), rng));
        const auto m = moe::upscale(base, ck, strategy, 0.6);
        const std::size_t count = m.trainable_parameter_count();
        if (count != m.moe_layers().size() * (4 * T * T + 3 * T)) ++bad;
        if (first == 0) first = count;
        else if (count != first) ++bad;
        if (width == 8) seen += fmt("T=%zu/%s:%zu ", T, strategy.name.c_str(), count);
      }
    }
  }
  return {bad == 0, fmt("%d mismatches; counts %s", bad, seen.c_str())};
}

// ---- quadratic LS routers ---------------------------------------------------------

double distance_to(const ParamVector& p, const std::vector<double>& target) {
  double s = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) s += std::pow(p.values()[k] - target[k], 2);
  return std::sqrt(s);
}

Outcome quadratic_ls() {
  const auto& f = quadratic_fixture();
  const double d = std::sqrt(2.0);
  double worst = 0.0;
  for (const auto& r : pareto::preference_grid(2, 11)) {
    const std::vector<double> target = {r[0], r[1]};  // r1 c1 + r2 c2 for unit-vector centers
    worst = std::max(worst, distance_to(moe::unload_params(f.model, r), target));
  }
  const double mid = distance_to(moe::unload_params(f.model, std::vector<double>{0.5, 0.5}), {0.5, 0.5});
  return {worst <= 0.02 * d && mid <= 0.02 * d,
          fmt("worst |unload(r) - sum r c| = %.4f, midpoint error %.4f (tol %.4f)", worst, mid, 0.02 * d)};
}

// ---- EPO ------------------------------------------------------------------------

Outcome quadratic_epo() {
  const auto& f = quadratic_fixture();
  train::TrainConfig cfg;
  cfg.steps = 2000;
  cfg.lr = 0.01;
  double worst_imb = 0.0, worst_t = 0.0;
  for (const auto& r : std::vector<std::vector<double>>{{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}}) {
    const auto res = train::train_joint(f.set.pretrained, f.suite, train::Mode::Epo, r, cfg);
    const double l1 = tasks::task_loss(f.suite, res.params, 0), l2 = tasks::task_loss(f.suite, res.params, 1);
    worst_imb = std::max(worst_imb, std::abs(r[0] * l1 - r[1] * l2) / (r[0] * l1 + r[1] * l2));
    // Position along c1 -> c2 and the balanced point t/(1-t) = sqrt(r2/r1).
    const double x = res.params.values()[0], y = res.params.values()[1];
    const double t = ((x - 1.0) * -1.0 + y * 1.0) / 2.0;
    const double q = std::sqrt(r[1] / r[0]);
    worst_t = std::max(worst_t, std::abs(t - q / (1.0 + q)));
  }
  return {worst_imb <= 0.05 && worst_t <= 0.03,
          fmt("max relative imbalance %.4f (tol 0.05), max |t - t*| %.4f (tol 0.03)", worst_imb, worst_t)};
}

// ---- front error bound -------------------------------------------------------------------

Outcome front_error_bound() {
  const auto& f = quadratic_fixture();
  const auto front = pareto::evaluate_front(f.model, f.suite, pareto::preference_grid(2, 101));
  // True front: l(t) = (t^2 d^2, (1-t)^2 d^2) along the segment between the centers.
  const double d2 = 2.0;
  std::vector<std::vector<double>> truth;
  for (int i = 0; i <= 100000; ++i) {
    const double t = i / 100000.0;
    truth.push_back({t * t * d2, (1 - t) * (1 - t) * d2});
  }
  const double dist = pareto::front_distance(front, oracle::to_front(truth));
  return {dist <= 0.05 * d2, fmt("front distance %.5f (tol %.3f)", dist, 0.05 * d2)};
}

// ---- classification --------------------------------------------------------------

struct ClassificationRun {
  moe::UpscaledModel model;
  pareto::SampledFront moe_front, interp_front, ta_front;
};

const ClassificationRun& classification_run() {
  static const ClassificationRun run = [] {
    const auto& f = cluster_fixture();
    ClassificationRun r;
    r.model = moe::upscale(f.set.pretrained, f.set.finetuned, moe::UpscaleStrategy::all_layers(), 0.6);
    train::TrainConfig cfg;
    cfg.steps = 10000;
    cfg.lr = 0.1;
    cfg.batch_size = 64;
    train::train_routers(r.model, f.suite, cfg);
    r.moe_front = pareto::evaluate_front(r.model, f.suite, pareto::preference_grid(2, 11));
    r.interp_front.task_count = 2;
    for (int i = 0; i <= 10; ++i) {
      const double a = i / 10.0;
      std::vector<double> v(f.set.pretrained.size());
      for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = (1 - a) * f.set.finetuned[0].values()[k] + a * f.set.finetuned[1].values()[k];
      r.interp_front.points.push_back(pareto::evaluate_point(f.suite, ParamVector(f.suite.layout, v)));
    }
    r.ta_front.task_count = 2;
    r.ta_front.points.push_back(pareto::evaluate_point(
        f.suite, merge::task_arithmetic(f.set.pretrained, merge::task_vectors(f.set.pretrained, f.set.finetuned))));
    return r;
  }();
  return run;
}

Outcome classification_tradeoff() {
  const auto& r = classification_run();
  const std::vector<pareto::SampledFront> all = {r.moe_front, r.interp_front, r.ta_front};
  const auto ref = pareto::auto_reference(all);
  auto hv = [&](const pareto::SampledFront& f) { return pareto::hypervolume(f, ref).value; };
  const double moe = hv(r.moe_front), interp = hv(r.interp_front), ta = hv(r.ta_front);
  return {moe >= interp && moe >= ta,
          fmt("hypervolume MoE %.4f, interpolation %.4f, task arithmetic %.4f (ref %.3f,%.3f)", moe, interp, ta,
              ref[0], ref[1])};
}

Outcome routing_specificity() {
  const auto& r = classification_run();
  const std::size_t layers = r.model.moe_layers().size();
  std::string detail;
  bool ok = true;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto e = unit_preference(2, i);
    std::size_t wins = 0;
    for (const auto& w : moe::routing_weights(r.model, e)) {
      bool strict = true;
      for (std::size_t j = 0; j < w.size(); ++j)
        if (j != i && !(w[i] > w[j])) strict = false;
      wins += strict ? 1 : 0;
    }
    ok = ok && 2 * wins >= layers;
    detail += fmt("e%zu: expert %zu largest in %zu/%zu layers; ", i + 1, i + 1, wins, layers);
  }
  return {ok, detail};
}

// ---- MGDA ------------------------------------------------------------------------

Outcome mgda() {
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_matrix(2, 1 + trial % 10, rng);
    const auto cf = scalar::mgda_weights(g);
    const auto fw = scalar::frank_wolfe_min_norm(g);
    worst = std::max({worst, std::abs(cf.weights[0] - fw.weights[0]), std::abs(cf.weights[1] - fw.weights[1])});
  }
  bool symmetric = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = oracle::random_vector(1 + trial % 5, rng);
    Matrix g(2, v.size());
    for (std::size_t k = 0; k < v.size(); ++k) g(0, k) = v[k], g(1, k) = -v[k];
    const auto w = scalar::mgda_weights(g).weights;
    symmetric = symmetric && w[0] == 0.5 && w[1] == 0.5;
  }
  return {worst <= 1e-6 && symmetric,
          fmt("closed form vs Frank-Wolfe max |diff| %.2e (tol 1e-6); opposing gradients exactly (0.5, 0.5): %s",
              worst, symmetric ? "yes" : "no")};
}

// ---- merge baselines ---------------------------------------------------------------

Outcome merge_baselines() {
  auto raw = [](std::vector<double> v) {
    const std::size_t n = v.size();
    return ParamVector(Layout({{"seg0", {n}, SegmentKind::Raw}}), std::move(v));
  };
  const auto base = raw({0, 0, 0});
  const std::vector<ParamVector> ck = {raw({2, -1, 0.1}), raw({1.5, 1, -0.1})};
  const auto ties = merge::ties_merging(base, merge::task_vectors(base, ck), 2.0 / 3.0, 1.0);
  const double ties_err = std::max({std::abs(ties.values()[0] - 1.75), std::abs(ties.values()[1]),
                                    std::abs(ties.values()[2])});
  const std::vector<Matrix> w = {Matrix(1, 1, {0.0}), Matrix(1, 1, {1.0})};
  const std::vector<Matrix> g = {Matrix(1, 1, {1.0}), Matrix(1, 1, {3.0})};
  const double regmean_err = std::abs(merge::regmean_merge(w, g)(0, 0) - 0.75);
  Rng rng(8);
  double fisher_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ParamVector> models;
    for (int i = 0; i < 3; ++i) models.push_back(raw(oracle::random_vector(6, rng)));
    std::vector<double> fv(6);
    for (double& v : fv) v = std::abs(oracle::random_vector(1, rng)[0]) + 1e-3;
    const std::vector<std::vector<double>> fishers(3, fv);
    const auto merged = merge::fisher_merge(models, fishers).merged;
    for (std::size_t k = 0; k < 6; ++k) {
      const double avg = (models[0].values()[k] + models[1].values()[k] + models[2].values()[k]) / 3.0;
      fisher_err = std::max(fisher_err, std::abs(merged.values()[k] - avg));
    }
  }
  return {ties_err <= 1e-12 && regmean_err <= 1e-12 && fisher_err <= 1e-12,
          fmt("Ties err %.1e, RegMean err %.1e, Fisher equal-weight err %.1e (tol 1e-12)", ties_err, regmean_err,
              fisher_err)};
}

// ---- end-to-end determinism ---------------------------------------------------------

Outcome end_to_end() {
  const auto root = std::filesystem::temp_directory_path() / "pwemoe_acceptance";
  std::filesystem::remove_all(root);
  std::string fronts[2];
  for (int run = 0; run < 2; ++run) {
    auto cfg = config::parse_config("[suite]\nkind = quadratic\nT = 2\n[train]\nsteps = 2000\n");
    cfg.workdir = root / ("run" + std::to_string(run));
    pipeline::Pipeline p(cfg);
    p.gen_tasks();
    p.finetune();
    p.upscale();
    p.train_routers();
    p.eval_front();
    std::ifstream in(cfg.workdir / pipeline::kFrontFile, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    fronts[run] = os.str();
  }
  const bool same = !fronts[0].empty() && fronts[0] == fronts[1];
  return {same, fmt("front.csv %zu bytes, runs byte-identical: %s", fronts[0].size(), same ? "yes" : "no")};
}

}  // namespace

int main() {
  criterion("gradient-oracle", 10, gradient_oracle);
  criterion("dominance-laws", 0, dominance_laws);
  criterion("hypervolume-oracle", 0, hypervolume_oracle);
  criterion("init-task-arithmetic", 0, init_matches_task_arithmetic);
  criterion("router-param-scaling", 0, scalability);
  criterion("quadratic-ls-routers", 60, quadratic_ls);
  criterion("quadratic-epo", 0, quadratic_epo);
  criterion("front-error-bound", 0, front_error_bound);
  criterion("classification-tradeoff", 120, classification_tradeoff);
  criterion("routing-specificity", 0, routing_specificity);
  criterion("mgda-min-norm", 0, mgda);
  criterion("merge-baselines", 0, merge_baselines);
  criterion("end-to-end-determinism", 120, end_to_end);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
