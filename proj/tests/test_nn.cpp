// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pwemoe/error.hpp"
#include "pwemoe/nn.hpp"

using namespace pwemoe;
using namespace pwemoe::nn;

namespace {

MlpModel random_model(const ArchSpec& arch, Rng& rng) {
  const auto layout = mlp_layout(arch);
  return unflatten(oracle::random_vector(layout.total(), rng, 0.7), layout);
}

Matrix one_hot_targets(std::size_t n, std::size_t k, Rng& rng) {
  Matrix t(n, k);
  std::uniform_int_distribution<std::size_t> c(0, k - 1);
  for (std::size_t i = 0; i < n; ++i) t(i, c(rng)) = 1.0;
  return t;
}

}  // namespace

TEST(Nn, FlattenRoundTrip) {
  Rng rng(3);
  const ArchSpec arch{{3, 5, 2}, Activation::Relu, Activation::Identity};
  const auto m = random_model(arch, rng);
  EXPECT_EQ(unflatten(flatten(m)), m);
  EXPECT_EQ(flatten(m).layout(), mlp_layout(arch));
  EXPECT_EQ(m.layers()[1].name, "fc1");
}

TEST(Nn, RejectsNonChainingLayers) {
  DenseLayer a{"a", Matrix(3, 2), std::vector<double>(3), Activation::Relu};
  DenseLayer b{"b", Matrix(1, 4), std::vector<double>(1), Activation::Identity};
  EXPECT_THROW(MlpModel({a, b}), ShapeError);
  DenseLayer c{"a", Matrix(1, 3), std::vector<double>(1), Activation::Identity};
  EXPECT_THROW(MlpModel({a, c}), ShapeError);
}

TEST(Nn, ForwardMatchesNaiveLoops) {
  Rng rng(5);
  const ArchSpec arch{{4, 6, 6, 3}, Activation::Relu, Activation::Identity};
  const auto m = random_model(arch, rng);
  const auto x = oracle::random_matrix(9, 4, rng);
  const auto y = oracle::random_matrix(9, 3, rng);
  EXPECT_NEAR(loss(m, {x, y}, LossKind::Mse), oracle::naive_loss(m, x, y, LossKind::Mse), 1e-12);
  const auto t = one_hot_targets(9, 3, rng);
  EXPECT_NEAR(loss(m, {x, t}, LossKind::SoftmaxCrossEntropy),
              oracle::naive_loss(m, x, t, LossKind::SoftmaxCrossEntropy), 1e-12);
}

TEST(Nn, SoftmaxOutputRowsSumToOne) {
  Rng rng(8);
  const auto m = random_model({{2, 4, 3}, Activation::Relu, Activation::Softmax}, rng);
  const auto out = forward(m, oracle::random_matrix(5, 2, rng));
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double s = 0.0;
    for (double v : out.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

class GradientOracle : public ::testing::TestWithParam<int> {};

TEST_P(GradientOracle, ReverseModeMatchesCentralDifferences) {
  Rng rng(100 + static_cast<std::uint64_t>(GetParam()));
  std::uniform_int_distribution<std::size_t> w(1, 5);
  const bool ce = GetParam() % 2 == 1;
  ArchSpec arch{{w(rng), w(rng), w(rng), ce ? 3 : w(rng)}, Activation::Relu, Activation::Identity};
  const auto m = random_model(arch, rng);
  const auto x = oracle::random_matrix(6, arch.widths.front(), rng);
  const auto y = ce ? one_hot_targets(6, 3, rng) : oracle::random_matrix(6, arch.widths.back(), rng);
  const auto kind = ce ? LossKind::SoftmaxCrossEntropy : LossKind::Mse;
  const auto layout = mlp_layout(arch);
  const auto report = loss_and_grad(m, {x, y}, kind, all_layers(m));
  const auto flat = flatten(m);
  const auto start = flat.values();
  const auto fd = oracle::central_difference(
      [&](const std::vector<double>& p) { return oracle::naive_loss(unflatten(p, layout), x, y, kind); },
      std::vector<double>(start.begin(), start.end()));
  double scale = 1e-8;
  for (double g : fd) scale = std::max(scale, std::abs(g));
  for (std::size_t i = 0; i < fd.size(); ++i)
    EXPECT_NEAR(report.grad.values()[i], fd[i], 1e-5 * scale) << "parameter " << i;
}

INSTANTIATE_TEST_SUITE_P(RandomModels, GradientOracle, ::testing::Range(0, 16));

TEST(Nn, SelectorRestrictsGradient) {
  Rng rng(9);
  const auto m = random_model({{2, 3, 2}, Activation::Relu, Activation::Identity}, rng);
  const auto x = oracle::random_matrix(4, 2, rng);
  const auto y = oracle::random_matrix(4, 2, rng);
  const auto full = loss_and_grad(m, {x, y}, LossKind::Mse, all_layers(m));
  const auto part = loss_and_grad(m, {x, y}, LossKind::Mse, {"fc0"});
  EXPECT_EQ(part.grad.layout().size(), 1u);
  const auto seg = full.grad.segment("fc0");
  ASSERT_EQ(part.grad.size(), seg.size());
  for (std::size_t i = 0; i < seg.size(); ++i) EXPECT_EQ(part.grad.values()[i], seg[i]);
  EXPECT_THROW(loss_and_grad(m, {x, y}, LossKind::Mse, {"fc7"}), SelectorError);
}

TEST(Nn, NonFiniteLossIsReported) {
  Rng rng(1);
  auto m = random_model({{1, 1}, Activation::Relu, Activation::Identity}, rng);
  Matrix x(1, 1, {std::numeric_limits<double>::infinity()});
  EXPECT_THROW(loss_and_grad(m, {x, Matrix(1, 1)}, LossKind::Mse, all_layers(m)), NumericError);
}
