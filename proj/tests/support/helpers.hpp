#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "meltgraph/graph_build.hpp"
#include "meltgraph/tensor.hpp"
#include "meltgraph/training.hpp"
#include "oracles.hpp"

namespace testing_support {

inline meltgraph::Tensor random_tensor(meltgraph::Shape shape, std::uint64_t seed, bool requires_grad = true,
                                       double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return meltgraph::Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

inline oracle::Dense to_dense(const meltgraph::Tensor& t) {
  oracle::Dense d = oracle::zeros(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) d[i][j] = t.at(i, j);
  return d;
}

inline std::vector<double> to_vector(const meltgraph::Tensor& t) { return {t.values().begin(), t.values().end()}; }

inline meltgraph::Tensor from_dense(const oracle::Dense& d, bool requires_grad = false) {
  std::vector<double> v;
  for (const auto& row : d) v.insert(v.end(), row.begin(), row.end());
  return meltgraph::Tensor::from_values({d.size(), d.empty() ? 0 : d[0].size()}, std::move(v), requires_grad);
}

inline double max_abs_diff(const oracle::Dense& a, const oracle::Dense& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

/// A connected 5-node graph with both edge classes: tracks {0,1,2} and {3,4}.
inline std::vector<meltgraph::Edge> five_node_edges() { return {{0, 1}, {1, 2}, {0, 3}, {2, 4}, {3, 4}, {1, 3}}; }
inline std::vector<std::int64_t> five_node_tracks() { return {0, 0, 0, 1, 1}; }

inline meltgraph::EdgeIndex five_node_index() {
  const auto edges = five_node_edges();
  const auto classes = meltgraph::label_edges(edges, five_node_tracks());
  return meltgraph::directed_edges(5, edges, classes);
}

inline std::vector<oracle::DirectedEdge> oracle_edges(const meltgraph::EdgeIndex& index) {
  std::vector<oracle::DirectedEdge> out;
  for (std::size_t e = 0; e < index.size(); ++e) {
    out.push_back({index.src[e], index.dst[e], static_cast<int>(index.edge_class[e])});
  }
  return out;
}

/// A small layer whose positions lie on a serpentine grid.
inline meltgraph::LayerScan tiny_layer(double width, double height, std::uint64_t seed = 1) {
  meltgraph::LayerSpec spec;
  spec.width_mm = width;
  spec.height_mm = height;
  spec.seed = seed;
  return meltgraph::generate_melt_signal(meltgraph::generate_scan_path(spec), spec);
}

/// A linear FC model whose prediction depends on laser power only: the
/// per-channel means of the on and off nodes of `layers`, standardized.
inline meltgraph::TrainedModel power_only_model(const std::vector<meltgraph::LayerScan>& layers) {
  using namespace meltgraph;
  TrainedModel model;
  model.spec.kind = ModelKind::kFc;
  model.spec.n_message_layers = 0;
  std::vector<Matrix> labels;
  for (const auto& l : layers) labels.push_back(l.labels);
  model.standardizer = Standardizer::fit(labels);
  model.params = init_params(model.spec, 0);
  std::vector<double> on(kNumChannels, 0.0), off(kNumChannels, 0.0);
  double n_on = 0, n_off = 0;
  for (const auto& l : layers) {
    for (std::size_t i = 0; i < l.size(); ++i) {
      const bool lit = l.features(i, kPower) > 0.5;
      (lit ? n_on : n_off) += 1;
      for (std::size_t c = 0; c < kNumChannels; ++c) (lit ? on : off)[c] += l.labels(i, c);
    }
  }
  auto w = model.params.get("head.w").mutable_values();
  auto b = model.params.get("head.b").mutable_values();
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const double lo = (off[c] / n_off - model.standardizer.mean[c]) / model.standardizer.stddev[c];
    const double hi = (on[c] / n_on - model.standardizer.mean[c]) / model.standardizer.stddev[c];
    w[kPower * kNumChannels + c] = hi - lo;
    b[c] = lo;
  }
  return model;
}

/// Small layers with injected anomalies.
inline std::vector<meltgraph::ScanGraph> small_eval_graphs(std::size_t count, std::uint64_t seed) {
  using namespace meltgraph;
  std::vector<ScanGraph> graphs;
  for (std::size_t i = 0; i < count; ++i) {
    LayerSpec spec;
    spec.width_mm = 2.0;
    spec.height_mm = 1.0;
    spec.seed = layer_seed(seed, 1, i);
    AnomalySpec a;
    a.run_length_nodes = {5, 15};
    auto scan = inject_anomalies(generate_melt_signal(generate_scan_path(spec), spec), a, layer_seed(seed, 2, i));
    graphs.push_back(build_graph(std::move(scan)));
  }
  return graphs;
}

}  // namespace testing_support
