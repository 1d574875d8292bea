// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pwemoe/error.hpp"
#include "pwemoe/merge.hpp"
#include "pwemoe/pwe_moe.hpp"
#include "pwemoe/tasks.hpp"

using namespace pwemoe;
using namespace pwemoe::moe;

namespace {

struct Fixture {
  ParamVector pretrained;
  std::vector<ParamVector> finetuned;
};

Fixture random_mlp_checkpoints(const nn::ArchSpec& arch, std::size_t T, Rng& rng) {
  const auto layout = nn::mlp_layout(arch);
  Fixture f{ParamVector(layout, oracle::random_vector(layout.total(), rng)), {}};
  for (std::size_t t = 0; t < T; ++t) {
    auto v = oracle::random_vector(layout.total(), rng, 0.3);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += f.pretrained.values()[k];
    f.finetuned.emplace_back(layout, v);
  }
  return f;
}

}  // namespace

TEST(Router, ParameterCountAndPacking) {
  for (std::size_t T : {2u, 3u, 8u}) {
    const auto r = init_router(T, 0.6, 1);
    EXPECT_EQ(r.parameter_count(), 4 * T * T + 3 * T);
    EXPECT_EQ(router_parameter_count(T), 4 * T * T + 3 * T);
    EXPECT_EQ(r.flat().size(), r.parameter_count());
    auto copy = init_router(T, 0.0, 99);
    copy.assign(r.flat());
    EXPECT_EQ(copy, r);
  }
}

TEST(Router, InitOutputsLambda) {
  const auto r = init_router(3, 0.6, 5);
  for (double b : r.b1) EXPECT_EQ(b, 0.0);
  for (double b : r.b2) EXPECT_EQ(b, 0.6);
  const auto w = route(r, std::vector<double>{0.2, 0.3, 0.5});
  for (double v : w) EXPECT_NEAR(v, 0.6, 0.01);
}

TEST(Router, RejectsOffSimplexPreference) {
  const auto r = init_router(2, 0.6, 0);
  EXPECT_THROW(route(r, std::vector<double>{0.7, 0.7}), DomainError);
  EXPECT_THROW(route(r, std::vector<double>{1.0}), ShapeError);
}

TEST(Router, BackwardMatchesFiniteDifferences) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t T = 2 + trial % 3;
    auto router = init_router(T, 0.5, static_cast<std::uint64_t>(trial), 0.5);
    const auto r = oracle::random_simplex(T, rng);
    const auto gw = oracle::random_vector(T, rng);
    const auto analytic = route_backward(router, r, gw);
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& p) {
          Router probe = router;
          probe.assign(p);
          const auto w = route(probe, r);
          double s = 0.0;
          for (std::size_t t = 0; t < T; ++t) s += gw[t] * w[t];
          return s;
        },
        router.flat());
    for (std::size_t k = 0; k < fd.size(); ++k) EXPECT_NEAR(analytic[k], fd[k], 1e-7);
  }
}

TEST(Upscale, StrategiesSelectLayers) {
  Rng rng(1);
  const auto f = random_mlp_checkpoints({{3, 4, 4, 4, 2}}, 2, rng);
  const auto all = upscale(f.pretrained, f.finetuned, UpscaleStrategy::all_layers(), 0.6);
  EXPECT_EQ(all.moe_layer_names(), (std::vector<std::string>{"fc0", "fc1", "fc2", "fc3"}));
  const auto odd = upscale(f.pretrained, f.finetuned, UpscaleStrategy::odd_layers_only(), 0.6);
  EXPECT_EQ(odd.moe_layer_names(), (std::vector<std::string>{"fc1", "fc3"}));
  const auto named = upscale(f.pretrained, f.finetuned, UpscaleStrategy::named({"fc2"}), 0.6);
  EXPECT_EQ(named.moe_layer_names(), (std::vector<std::string>{"fc2"}));
  EXPECT_THROW(UpscaleStrategy::preset("attention"), DomainError);
}

TEST(Upscale, ZeroLambdaKeepsPretrainedStaticLayers) {
  Rng rng(2);
  const auto f = random_mlp_checkpoints({{3, 4, 4, 2}}, 2, rng);
  const auto m = upscale(f.pretrained, f.finetuned, UpscaleStrategy::odd_layers_only(), 0.0);
  for (const std::string name : {"fc0", "fc2"}) {
    const auto a = m.static_params().segment(name);
    const auto b = f.pretrained.segment(name);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST(Upscale, LayerGetsItsOwnTaskVectors) {
  Rng rng(3);
  const auto f = random_mlp_checkpoints({{2, 3, 2}}, 3, rng);
  const auto m = upscale(f.pretrained, f.finetuned, UpscaleStrategy::all_layers(), 0.6);
  const auto* layer = m.find_moe_layer("fc1");
  ASSERT_NE(layer, nullptr);
  EXPECT_EQ(layer->task_count(), 3u);
  for (std::size_t t = 0; t < 3; ++t) {
    const auto col = layer->dictionary.column(t);
    const auto ft = f.finetuned[t].segment("fc1");
    const auto base = f.pretrained.segment("fc1");
    for (std::size_t k = 0; k < col.size(); ++k) EXPECT_EQ(col[k], ft[k] - base[k]);
  }
}

TEST(Upscale, UnloadMatchesDirectEvaluation) {
  Rng rng(4);
  const auto f = random_mlp_checkpoints({{3, 5, 5, 2}}, 3, rng);
  auto m = upscale(f.pretrained, f.finetuned, UpscaleStrategy::odd_layers_only(), 0.6, 7);
  for (auto& l : m.moe_layers()) {
    auto p = l.router.flat();
    for (double& v : p) v += 0.3 * std::normal_distribution<double>(0, 1)(rng);
    l.router.assign(p);
  }
  const auto x = oracle::random_matrix(8, 3, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = oracle::random_simplex(3, rng);
    EXPECT_EQ(nn::forward(unload(m, r), x), moe_forward(m, r, x));
  }
}

TEST(Upscale, FreshModelIsCloseToTaskArithmetic) {
  Rng rng(5);
  const auto f = random_mlp_checkpoints({{2, 4, 2}}, 2, rng);
  const auto m = upscale(f.pretrained, f.finetuned, UpscaleStrategy::all_layers(), 0.6, 11);
  const auto ta = merge::task_arithmetic(f.pretrained, merge::task_vectors(f.pretrained, f.finetuned), 0.6);
  const auto d = merge::task_vectors(f.pretrained, f.finetuned);
  double dmax = 0.0;
  for (std::size_t t = 0; t < 2; ++t)
    for (double v : d.column(t)) dmax = std::max(dmax, std::abs(v));
  const auto r = oracle::random_simplex(2, rng);
  const auto p = unload_params(m, r);
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p.values()[k], ta.values()[k], 0.01 * 2 * dmax);
}

TEST(Upscale, RejectsMismatchedInputs) {
  Rng rng(6);
  const auto f = random_mlp_checkpoints({{2, 4, 2}}, 2, rng);
  const std::vector<ParamVector> one = {f.finetuned[0]};
  EXPECT_THROW(upscale(f.pretrained, one, UpscaleStrategy::all_layers(), 0.6), DomainError);
  const auto other = random_mlp_checkpoints({{2, 3, 2}}, 2, rng);
  const std::vector<ParamVector> mixed = {f.finetuned[0], other.finetuned[0]};
  EXPECT_THROW(upscale(f.pretrained, mixed, UpscaleStrategy::all_layers(), 0.6), LayoutError);
  EXPECT_THROW(upscale(f.pretrained, f.finetuned, UpscaleStrategy::named({"fc9"}), 0.6), Error);
}

TEST(Upscale, TrainableCountScalesWithLayersNotWidth) {
  Rng rng(7);
  for (std::size_t width : {4u, 32u}) {
    const auto f = random_mlp_checkpoints({{2, width, width, 2}}, 3, rng);
    const auto m = upscale(f.pretrained, f.finetuned, UpscaleStrategy::all_layers(), 0.6);
    EXPECT_EQ(m.trainable_parameter_count(), 3 * (4 * 9 + 3 * 3));
  }
}

TEST(Upscale, QuadraticSuiteUpscalesRawSegments) {
  const auto s = tasks::gen_quadratic_suite(2, 4, {{1, 0, 0, 0}, {0, 1, 0, 0}}, 2);
  const ParamVector base(s.layout, {0, 0, 0, 0});
  const std::vector<ParamVector> ck = {ParamVector(s.layout, {1, 0, 0, 0}), ParamVector(s.layout, {0, 1, 0, 0})};
  const auto m = upscale(base, ck, UpscaleStrategy::all_layers(), 0.6);
  EXPECT_EQ(m.moe_layers().size(), 2u);
  EXPECT_EQ(m.trainable_parameter_count(), 2 * router_parameter_count(2));
}
