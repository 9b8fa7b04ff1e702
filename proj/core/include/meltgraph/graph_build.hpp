#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "meltgraph/matrix.hpp"
#include "meltgraph/scan_synth.hpp"
#include "meltgraph/sparse.hpp"

namespace meltgraph {

/// Undirected edge with u < v.
struct Edge {
  std::uint32_t u;
  std::uint32_t v;
  auto operator<=>(const Edge&) const = default;
};

enum class EdgeClass : std::uint8_t { kSameTrack = 0, kAdjacentTrack = 1 };

/// k-nearest-neighbour graph over 2-D positions, symmetrized by union.
/// Ties in distance go to the lower node index. Returns sorted unique edges.
std::vector<Edge> knn_edges(const Matrix& positions, std::size_t k);

std::vector<EdgeClass> label_edges(std::span<const Edge> edges, std::span<const std::int64_t> track_id);

struct GraphOptions {
  std::size_t k = 6;
  bool self_loops = true;
  std::size_t smoothing_passes = 1;
};

/// D̃^{-1/2} Ã D̃^{-1/2}, where Ã is the adjacency with optional self-loops.
struct SmoothingOperator {
  CsrMatrix matrix;
  bool self_loops = true;
};

SmoothingOperator smoothing_operator(std::size_t n_nodes, std::span<const Edge> edges, bool self_loops);

/// Z' = S Z, repeated `passes` times.
std::vector<double> apply_smoothing(const SmoothingOperator& op, std::span<const double> z, std::size_t passes = 1);

/// Message-passing view of a graph: directed edges src -> dst, both
/// directions of every undirected edge, ordered by (dst, src).
struct EdgeIndex {
  std::size_t n_nodes = 0;
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> dst;
  std::vector<EdgeClass> edge_class;

  std::size_t size() const { return src.size(); }
};

EdgeIndex directed_edges(std::size_t n_nodes, std::span<const Edge> edges, std::span<const EdgeClass> classes);

/// A layer with its spatio-temporal graph and the cached smoothing operator.
struct ScanGraph {
  LayerScan scan;
  std::vector<Edge> edges;
  std::vector<EdgeClass> edge_class;
  std::vector<std::size_t> degree;
  SmoothingOperator smoothing;
  GraphOptions options;

  std::size_t n_nodes() const { return scan.size(); }
  EdgeIndex edge_index() const { return directed_edges(n_nodes(), edges, edge_class); }
  CsrMatrix adjacency() const;
};

ScanGraph build_graph(LayerScan scan, const GraphOptions& options = {});

/// Graph over explicit edges (validated, deduplicated).
ScanGraph make_graph(LayerScan scan, std::vector<Edge> edges, const GraphOptions& options = {});

}  // namespace meltgraph
