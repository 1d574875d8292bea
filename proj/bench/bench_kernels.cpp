// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP kernels. Arg is the batch (or point) count.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pwemoe/kernels.hpp"

namespace {

using pwemoe::Matrix;
namespace k = pwemoe::kernels;

constexpr std::size_t kIn = 64;
constexpr std::size_t kOut = 64;

Matrix random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

std::vector<double> augmented() {
  const auto m = random_matrix(kOut, kIn + 1, 1);
  return {m.data().begin(), m.data().end()};
}

template <auto Kernel>
void BM_dense_forward(benchmark::State& state) {
  const auto a = augmented();
  const auto x = random_matrix(state.range(0), kIn, 2);
  Matrix z(x.rows(), kOut);
  for (auto _ : state) {
    Kernel(a, x, z);
    benchmark::DoNotOptimize(z.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_dense_grad_weights(benchmark::State& state) {
  const auto dz = random_matrix(state.range(0), kOut, 3);
  const auto x = random_matrix(state.range(0), kIn, 4);
  std::vector<double> grad(kOut * (kIn + 1));
  for (auto _ : state) {
    Kernel(dz, x, 1.0, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_dense_grad_input(benchmark::State& state) {
  const auto a = augmented();
  const auto dz = random_matrix(state.range(0), kOut, 5);
  Matrix dx(dz.rows(), kIn);
  for (auto _ : state) {
    Kernel(a, dz, dx);
    benchmark::DoNotOptimize(dx.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_mc_dominated_count(benchmark::State& state) {
  Matrix front(50, 2);
  for (std::size_t i = 0; i < 50; ++i) {
    front(i, 0) = i / 49.0;
    front(i, 1) = 1.0 - i / 49.0;
  }
  const std::vector<double> lower = {0.0, 0.0}, ref = {1.1, 1.1};
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(front, lower, ref, state.range(0), 0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_pairwise_distances(benchmark::State& state) {
  const auto pts = random_matrix(state.range(0), 16, 6);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(pts));
}

BENCHMARK(BM_dense_forward<k::dense_forward_serial>)->Name("dense_forward/serial")->Arg(64)->Arg(1024);
BENCHMARK(BM_dense_forward<k::dense_forward_omp>)->Name("dense_forward/omp")->Arg(64)->Arg(1024);
BENCHMARK(BM_dense_grad_weights<k::dense_grad_weights_serial>)->Name("dense_grad_weights/serial")->Arg(64)->Arg(1024);
BENCHMARK(BM_dense_grad_weights<k::dense_grad_weights_omp>)->Name("dense_grad_weights/omp")->Arg(64)->Arg(1024);
BENCHMARK(BM_dense_grad_input<k::dense_grad_input_serial>)->Name("dense_grad_input/serial")->Arg(64)->Arg(1024);
BENCHMARK(BM_dense_grad_input<k::dense_grad_input_omp>)->Name("dense_grad_input/omp")->Arg(64)->Arg(1024);
BENCHMARK(BM_mc_dominated_count<k::mc_dominated_count_serial>)->Name("mc_dominated_count/serial")->Arg(100000);
BENCHMARK(BM_mc_dominated_count<k::mc_dominated_count_omp>)->Name("mc_dominated_count/omp")->Arg(100000);
BENCHMARK(BM_pairwise_distances<k::pairwise_distances_serial>)->Name("pairwise_distances/serial")->Arg(256);
BENCHMARK(BM_pairwise_distances<k::pairwise_distances_omp>)->Name("pairwise_distances/omp")->Arg(256);

}  // namespace

BENCHMARK_MAIN();
