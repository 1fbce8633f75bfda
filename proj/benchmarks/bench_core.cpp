#include <benchmark/benchmark.h>

#include <random>

#include "stsc/dataset.hpp"
#include "stsc/layers.hpp"
#include "stsc/model.hpp"
#include "stsc/neighbors.hpp"
#include "stsc/optim.hpp"
#include "stsc/stats.hpp"
#include "stsc/synthetic.hpp"

using namespace stsc;

namespace {

Tensor uniform(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : t.data()) v = u(rng);
  return t;
}

void BM_ConvForward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  Conv2d conv(LayerSpec::conv(16, 32, {3, 3}, {2, 2}, {1, 1}));
  Rng rng(1);
  conv.initialize(rng);
  const Tensor x = uniform({batch, 30, 5, 16}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, Mode::train));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ConvForward)->Arg(32)->Arg(128);

void BM_ConvBackward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  Conv2d conv(LayerSpec::conv(16, 32, {3, 3}, {2, 2}, {1, 1}));
  Rng rng(1);
  conv.initialize(rng);
  const Tensor x = uniform({batch, 30, 5, 16}, rng);
  const Tensor g = uniform(conv.forward(x, Mode::train).shape(), rng);
  for (auto _ : state) {
    state.PauseTiming();
    conv.zero_grad();
    conv.forward(x, Mode::train);
    state.ResumeTiming();
    benchmark::DoNotOptimize(conv.backward(g));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ConvBackward)->Arg(32)->Arg(128);

void BM_DaeXTrainStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const ModelSpec spec;
  Network dae = build_dae_x(spec);
  Rng rng(2);
  dae.initialize(rng);
  TrainingConfig cfg;
  Adam adam(cfg);
  const Tensor x = uniform({batch, 60, 10, 4}, rng);
  for (auto _ : state) {
    dae.zero_grad();
    const Tensor y = dae.forward(x, Mode::train);
    dae.backward(mse_grad(y, x));
    adam.step(dae.parameters());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DaeXTrainStep)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Topsis(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> m(n * 3);
  for (double& v : m) v = u(rng);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("S" + std::to_string(i));
  for (auto _ : state) benchmark::DoNotOptimize(topsis_rank(m, n, 3, {}, ids));
}
BENCHMARK(BM_Topsis)->Arg(20)->Arg(200);

void BM_SelectNeighbors(benchmark::State& state) {
  SynthConfig cfg;
  cfg.day_count = 1;
  cfg.missing_rate = 0.0;
  cfg.outlier_rate = 0.0;
  const SynthResult s = generate_synthetic(cfg);
  const std::size_t row = s.observed.row(0, 120);
  const NeighborQuery query{s.observed.sensors()[10], s.observed.time(row)};
  for (auto _ : state) benchmark::DoNotOptimize(select_neighbors(s.observed, s.network, query));
}
BENCHMARK(BM_SelectNeighbors);

void BM_KruskalWallis(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> groups(5, std::vector<double>(n));
  for (auto& g : groups)
    for (double& v : g) v = z(rng);
  for (auto _ : state) benchmark::DoNotOptimize(kruskal_wallis(groups));
}
BENCHMARK(BM_KruskalWallis)->Arg(100)->Arg(10000);

}  // namespace
BENCHMARK_MAIN();
