// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pwemoe/error.hpp"
#include "pwemoe/scalarizers.hpp"

using namespace pwemoe;
using namespace pwemoe::scalar;

TEST(Ls, WeightedSum) {
  EXPECT_EQ(ls_scalarize(std::vector<double>{1, 3}, std::vector<double>{0.25, 0.75}), 2.5);
}

TEST(NonUniformity, ZeroWhenBalancedPositiveOtherwise) {
  EXPECT_NEAR(non_uniformity(std::vector<double>{2, 2}, std::vector<double>{0.5, 0.5}), 0.0, 1e-15);
  EXPECT_NEAR(non_uniformity(std::vector<double>{4, 1}, std::vector<double>{0.2, 0.8}), 0.0, 1e-15);
  // l_hat = (0.75, 0.25): KL to uniform = 0.75 ln 1.5 + 0.25 ln 0.5.
  EXPECT_NEAR(non_uniformity(std::vector<double>{3, 1}, std::vector<double>{0.5, 0.5}),
              0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-14);
  EXPECT_THROW(non_uniformity(std::vector<double>{0, 0}, std::vector<double>{0.5, 0.5}), DomainError);
}

TEST(Epo, ReturnsPreferenceWhenBalanced) {
  const std::vector<double> r = {0.2, 0.8};
  EXPECT_EQ(epo_step_weights(std::vector<double>{4, 1}, r), r);
}

TEST(Epo, DescendsTheOverweightedObjective) {
  const auto a = epo_step_weights(std::vector<double>{5, 1}, std::vector<double>{0.5, 0.5});
  EXPECT_GT(a[0], 0.99);
  EXPECT_NEAR(a[0] + a[1], 1.0, 1e-12);
}

TEST(Mgda, ClosedFormExamples) {
  // Opposing gradients: gamma = (0.5, 0.5) exactly.
  const auto opp = mgda_weights(Matrix(2, 2, {1, 0, -1, 0}));
  EXPECT_EQ(opp.weights, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(opp.norm_squared, 0.0);
  // One gradient is the min-norm point.
  const auto one = mgda_weights(Matrix(2, 2, {1, 0, 3, 0}));
  EXPECT_EQ(one.weights, (std::vector<double>{1.0, 0.0}));
  const auto same = mgda_weights(Matrix(2, 2, {1, 1, 1, 1}));
  EXPECT_NEAR(same.weights[0] + same.weights[1], 1.0, 1e-15);
}

TEST(Mgda, ClosedFormMatchesFrankWolfe) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_matrix(2, 1 + trial % 6, rng);
    const auto cf = mgda_weights(g);
    const auto fw = frank_wolfe_min_norm(g);
    EXPECT_NEAR(cf.weights[0], fw.weights[0], 1e-6);
    EXPECT_NEAR(cf.weights[1], fw.weights[1], 1e-6);
  }
}

TEST(Mgda, FrankWolfeReachesKktConditions) {
  Rng rng(18);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t T = 3 + trial % 4;
    const auto g = oracle::random_matrix(T, 5, rng);
    const auto res = mgda_weights(g);
    double s = 0.0;
    for (double w : res.weights) {
      EXPECT_GE(w, 0.0);
      s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    // Oracle: the min-norm point d satisfies g_t . d >= |d|^2 for every t.
    std::vector<double> d(5, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < 5; ++k) d[k] += res.weights[t] * g(t, k);
    double dd = 0.0;
    for (double v : d) dd += v * v;
    for (std::size_t t = 0; t < T; ++t) {
      double gd = 0.0;
      for (std::size_t k = 0; k < 5; ++k) gd += g(t, k) * d[k];
      EXPECT_GE(gd, dd - 1e-7);
    }
  }
}
