// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pwemoe/error.hpp"
#include "pwemoe/pwe_moe.hpp"
#include "pwemoe/tasks.hpp"
#include "pwemoe/trainer.hpp"

using namespace pwemoe;

namespace {

struct QuadSetup {
  tasks::TaskSuite suite = tasks::gen_quadratic_suite(2, 2, {{1, 0}, {0, 1}});
  moe::UpscaledModel model;
  QuadSetup() {
    const auto set = tasks::build_checkpoints(suite, {5, 0.1, 0, 0}, {500, 0.1, 0, 0});
    model = moe::upscale(set.pretrained, set.finetuned, moe::UpscaleStrategy::all_layers(), 0.6);
  }
};

}  // namespace

TEST(Dirichlet, SamplesLieOnTheSimplexWithTheRightMean) {
  Rng rng(3);
  std::vector<double> mean(3, 0.0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto r = train::sample_preference(3, 1.0, rng);
    EXPECT_TRUE(on_simplex(r, true));
    for (std::size_t t = 0; t < 3; ++t) mean[t] += r[t] / n;
  }
  for (double m : mean) EXPECT_NEAR(m, 1.0 / 3.0, 0.01);
}

TEST(Config, ValidationRejectsBadValues) {
  train::TrainConfig c;
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(train::mode_from_string("adam"), ConfigError);
  EXPECT_EQ(train::mode_from_string("epo"), train::Mode::Epo);
}

TEST(Routers, TrainingTouchesOnlyRouters) {
  QuadSetup s;
  const auto frozen = s.model.frozen_checksum();
  const auto before = s.model.moe_layers()[0].router;
  train::TrainConfig cfg;
  cfg.steps = 50;
  const auto log = train::train_routers(s.model, s.suite, cfg);
  EXPECT_EQ(log.records.size(), 50u);
  EXPECT_EQ(s.model.frozen_checksum(), frozen);
  EXPECT_NE(s.model.moe_layers()[0].router, before);
}

TEST(Routers, TrainingIsBitReproducible) {
  QuadSetup a, b;
  train::TrainConfig cfg;
  cfg.steps = 100;
  cfg.seed = 5;
  const auto la = train::train_routers(a.model, a.suite, cfg);
  const auto lb = train::train_routers(b.model, b.suite, cfg);
  EXPECT_EQ(a.model, b.model);
  ASSERT_EQ(la.records.size(), lb.records.size());
  for (std::size_t i = 0; i < la.records.size(); ++i) {
    EXPECT_EQ(la.records[i].r, lb.records[i].r);
    EXPECT_EQ(la.records[i].losses, lb.records[i].losses);
  }
}

TEST(Routers, MgdaIsNotARouterMode) {
  QuadSetup s;
  train::TrainConfig cfg;
  cfg.mode = train::Mode::Mgda;
  EXPECT_THROW(train::train_routers(s.model, s.suite, cfg), ConfigError);
}

TEST(Routers, LogRecordsAggregateAndNonUniformity) {
  QuadSetup s;
  train::TrainConfig cfg;
  cfg.steps = 3;
  const auto log = train::train_routers(s.model, s.suite, cfg);
  for (const auto& rec : log.records) {
    EXPECT_EQ(rec.losses.size(), 2u);
    EXPECT_NEAR(rec.aggregate, rec.r[0] * rec.losses[0] + rec.r[1] * rec.losses[1], 1e-12);
    EXPECT_GE(rec.non_uniformity, 0.0);
  }
}

TEST(Joint, LsRecoversWeightedCenter) {
  QuadSetup s;
  const ParamVector start(s.suite.layout, {2, 2});
  train::TrainConfig cfg;
  cfg.steps = 1000;
  const std::vector<double> r = {0.3, 0.7};
  const auto res = train::train_joint(start, s.suite, train::Mode::Ls, r, cfg);
  EXPECT_NEAR(res.params.values()[0], 0.3, 1e-6);
  EXPECT_NEAR(res.params.values()[1], 0.7, 1e-6);
}

TEST(Joint, MgdaReachesAParetoStationaryPoint) {
  QuadSetup s;
  const ParamVector start(s.suite.layout, {2, 2});
  train::TrainConfig cfg;
  cfg.steps = 2000;
  const std::vector<double> r = {0.5, 0.5};
  const auto res = train::train_joint(start, s.suite, train::Mode::Mgda, r, cfg);
  // Pareto set of the suite is the segment between the centers.
  const double x = res.params.values()[0], y = res.params.values()[1];
  EXPECT_NEAR(x + y, 1.0, 1e-3);
  EXPECT_GE(x, -1e-3);
  EXPECT_GE(y, -1e-3);
}
