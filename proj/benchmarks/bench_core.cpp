#include <benchmark/benchmark.h>

#include <random>

#include "meltgraph/anomaly.hpp"
#include "meltgraph/graph_build.hpp"
#include "meltgraph/metrics.hpp"
#include "meltgraph/models.hpp"
#include "meltgraph/scan_synth.hpp"
#include "meltgraph/training.hpp"

using namespace meltgraph;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool requires_grad) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> values(n);
  for (auto& v : values) v = u(rng);
  return Tensor::from_values(shape, values, requires_grad);
}

LayerScan layer_of(double width, double height) {
  LayerSpec spec;
  spec.width_mm = width;
  spec.height_mm = height;
  spec.seed = 1;
  return generate_melt_signal(generate_scan_path(spec), spec);
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, 64}, 1, false);
  const auto b = random_tensor({64, 64}, 2, false);
  Tape tape(false);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(tape, a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Matmul)->Arg(1000)->Arg(5000);

static void BM_KnnEdges(benchmark::State& state) {
  const auto layer = layer_of(4.0, 0.1 * static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(knn_edges(layer.positions, 6));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * layer.size()));
}
BENCHMARK(BM_KnnEdges)->Arg(10)->Arg(50);

static void BM_Smoothing(benchmark::State& state) {
  const auto graph = build_graph(layer_of(4.0, 5.0));
  std::vector<double> z(graph.n_nodes(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(apply_smoothing(graph.smoothing, z));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * graph.n_nodes()));
}
BENCHMARK(BM_Smoothing);

static void BM_TransformerForward(benchmark::State& state) {
  const auto graph = build_graph(layer_of(4.0, 5.0));
  const auto tensors = make_graph_tensors(graph);
  const ModelSpec spec;
  const auto params = init_params(spec, 3);
  for (auto _ : state) benchmark::DoNotOptimize(predict(spec, params, tensors, graph.scan.features));
}
BENCHMARK(BM_TransformerForward)->Unit(benchmark::kMillisecond);

static void BM_TransformerTrainEpoch(benchmark::State& state) {
  const std::vector<ScanGraph> graphs = {build_graph(layer_of(4.0, 5.0))};
  TrainConfig config;
  config.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(ModelSpec{}, graphs, config));
}
BENCHMARK(BM_TransformerTrainEpoch)->Unit(benchmark::kMillisecond);

static void BM_AveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::bernoulli_distribution b(1.0 / 41.0);
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = b(rng) ? 1 : 0;
    s[i] = g(rng) + 2.0 * y[i];
  }
  y[0] = 1;
  y[1] = 0;
  for (auto _ : state) benchmark::DoNotOptimize(average_precision(s, y));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_AveragePrecision)->Arg(20000);

BENCHMARK_MAIN();
