#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "tcdesc/knn.hpp"
#include "tcdesc/loss.hpp"
#include "tcdesc/net.hpp"
#include "tcdesc/topology.hpp"

namespace {

using tcdesc::DenseMatrix;

DenseMatrix unit_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  DenseMatrix m(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (double& v : m.row(i)) {
      v = normal(rng);
      sq += v * v;
    }
    for (double& v : m.row(i)) v /= std::sqrt(sq);
  }
  return m;
}

void BM_PairwiseDistances(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = unit_rows(n, 32, 1);
  const DenseMatrix p = unit_rows(n, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(tcdesc::pairwise_distances(a, p));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PairwiseDistances)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix x = unit_rows(n, 32, 3);
  for (auto _ : state) benchmark::DoNotOptimize(tcdesc::top_k_within(x, 20));
}
BENCHMARK(BM_TopK)->RangeMultiplier(2)->Range(64, 1024);

void BM_FitWeights(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const DenseMatrix nb = unit_rows(k, 128, 4);
  const DenseMatrix anchor = unit_rows(1, 128, 5);
  for (auto _ : state) benchmark::DoNotOptimize(tcdesc::fit_weights(anchor.row(0), nb));
}
BENCHMARK(BM_FitWeights)->Arg(8)->Arg(20)->Arg(64);

void BM_BatchLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = unit_rows(n, 32, 6);
  const DenseMatrix p = unit_rows(n, 32, 7);
  tcdesc::LossConfig cfg;
  cfg.k = 8;
  cfg.fixed_lambda = 0.5;
  cfg.topology_mode = static_cast<tcdesc::TopologyMode>(state.range(1));
  tcdesc::LossGradient g;
  for (auto _ : state) benchmark::DoNotOptimize(tcdesc::batch_loss(a, p, 0, cfg, &g));
}
BENCHMARK(BM_BatchLoss)
    ->ArgsProduct({{64, 256}, {0, 1, 2}})
    ->ArgNames({"n", "mode"});

void BM_TrainStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto net = tcdesc::EmbeddingNet<double>::create({16, 64, 64, 32}, 1);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  tcdesc::Matrix<double> patches(2 * n, 16);
  for (double& v : patches.data()) v = normal(rng);
  tcdesc::LossConfig cfg;
  cfg.k = 8;
  cfg.fixed_lambda = 0.5;
  for (auto _ : state) {
    auto pass = tcdesc::forward(net, patches);
    tcdesc::attach_batch_loss(pass, 0, cfg);
    benchmark::DoNotOptimize(tcdesc::backward(net, pass, 1.0));
  }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
