#include "meltgraph/graph_build.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "meltgraph/error.hpp"

namespace meltgraph {
namespace {

struct Candidate {
  double dist2;
  std::uint32_t id;
  bool operator<(const Candidate& o) const { return dist2 != o.dist2 ? dist2 < o.dist2 : id < o.id; }
};

}  // namespace

std::vector<Edge> knn_edges(const Matrix& positions, std::size_t k) {
  const std::size_t n = positions.rows;
  if (positions.cols != 2) throw DimensionError("knn_edges: positions must be N x 2");
  if (n < 2) throw InvalidArgument("knn_edges: need at least 2 nodes");
  if (k == 0 || k >= n) {
    std::ostringstream msg;
    msg << "knn_edges: k must satisfy 1 <= k < N (k=" << k << ", N=" << n << ")";
    throw InvalidArgument(msg.str());
  }

  // Sweep outwards in x order; a candidate column can be skipped once its x
  // gap alone exceeds the current k-th best distance.
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return positions(a, 0) != positions(b, 0) ? positions(a, 0) < positions(b, 0) : a < b;
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  std::vector<Edge> edges;
  edges.reserve(n * k);
  std::priority_queue<Candidate> best;
  for (std::uint32_t i = 0; i < n; ++i) {
    best = {};
    const double xi = positions(i, 0);
    const double yi = positions(i, 1);
    auto consider = [&](std::uint32_t j) {
      const double dx = positions(j, 0) - xi;
      const double dy = positions(j, 1) - yi;
      const Candidate c{dx * dx + dy * dy, j};
      if (best.size() < k) {
        best.push(c);
      } else if (c < best.top()) {
        best.pop();
        best.push(c);
      }
    };
    auto exhausted = [&](std::uint32_t j) {
      const double dx = positions(j, 0) - xi;
      return best.size() == k && dx * dx > best.top().dist2;
    };
    for (std::size_t r = rank[i] + 1; r < n && !exhausted(order[r]); ++r) consider(order[r]);
    for (std::size_t r = rank[i]; r-- > 0 && !exhausted(order[r]);) consider(order[r]);
    while (!best.empty()) {
      const std::uint32_t j = best.top().id;
      best.pop();
      edges.push_back({std::min(i, j), std::max(i, j)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<EdgeClass> label_edges(std::span<const Edge> edges, std::span<const std::int64_t> track_id) {
  std::vector<EdgeClass> classes;
  classes.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.u >= track_id.size() || e.v >= track_id.size()) throw InvalidArgument("label_edges: edge index out of range");
    classes.push_back(track_id[e.u] == track_id[e.v] ? EdgeClass::kSameTrack : EdgeClass::kAdjacentTrack);
  }
  return classes;
}

SmoothingOperator smoothing_operator(std::size_t n_nodes, std::span<const Edge> edges, bool self_loops) {
  std::vector<double> degree(n_nodes, self_loops ? 1.0 : 0.0);
  for (const auto& e : edges) {
    if (e.u >= n_nodes || e.v >= n_nodes || e.u == e.v) throw InvalidArgument("smoothing_operator: invalid edge");
    degree[e.u] += 1.0;
    degree[e.v] += 1.0;
  }
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (degree[i] == 0.0) {
      std::ostringstream msg;
      msg << "smoothing_operator: node " << i << " is isolated; D^{-1/2} is undefined without self-loops";
      throw InvalidArgument(msg.str());
    }
  }
  std::vector<double> inv_sqrt(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

  std::vector<CsrMatrix::Triplet> triplets;
  triplets.reserve(2 * edges.size() + (self_loops ? n_nodes : 0));
  for (const auto& e : edges) {
    const double w = inv_sqrt[e.u] * inv_sqrt[e.v];
    triplets.push_back({e.u, e.v, w});
    triplets.push_back({e.v, e.u, w});
  }
  if (self_loops) {
    for (std::uint32_t i = 0; i < n_nodes; ++i) triplets.push_back({i, i, inv_sqrt[i] * inv_sqrt[i]});
  }
  return {CsrMatrix::from_triplets(n_nodes, n_nodes, std::move(triplets)), self_loops};
}

std::vector<double> apply_smoothing(const SmoothingOperator& op, std::span<const double> z, std::size_t passes) {
  if (z.size() != op.matrix.cols) {
    std::ostringstream msg;
    msg << "apply_smoothing: score length " << z.size() << " does not match operator size " << op.matrix.cols;
    throw DimensionError(msg.str());
  }
  std::vector<double> current(z.begin(), z.end());
  for (std::size_t p = 0; p < passes; ++p) current = op.matrix.multiply(current);
  return current;
}

EdgeIndex directed_edges(std::size_t n_nodes, std::span<const Edge> edges, std::span<const EdgeClass> classes) {
  if (classes.size() != edges.size()) throw DimensionError("directed_edges: one class per edge required");
  struct Directed {
    std::uint32_t src, dst;
    EdgeClass cls;
  };
  std::vector<Directed> all;
  all.reserve(2 * edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    all.push_back({edges[e].u, edges[e].v, classes[e]});
    all.push_back({edges[e].v, edges[e].u, classes[e]});
  }
  std::sort(all.begin(), all.end(),
            [](const Directed& a, const Directed& b) { return a.dst != b.dst ? a.dst < b.dst : a.src < b.src; });
  EdgeIndex index;
  index.n_nodes = n_nodes;
  index.src.reserve(all.size());
  index.dst.reserve(all.size());
  index.edge_class.reserve(all.size());
  for (const auto& d : all) {
    index.src.push_back(d.src);
    index.dst.push_back(d.dst);
    index.edge_class.push_back(d.cls);
  }
  return index;
}

CsrMatrix ScanGraph::adjacency() const {
  std::vector<CsrMatrix::Triplet> triplets;
  triplets.reserve(2 * edges.size());
  for (const auto& e : edges) {
    triplets.push_back({e.u, e.v, 1.0});
    triplets.push_back({e.v, e.u, 1.0});
  }
  return CsrMatrix::from_triplets(n_nodes(), n_nodes(), std::move(triplets));
}

ScanGraph make_graph(LayerScan scan, std::vector<Edge> edges, const GraphOptions& options) {
  const std::size_t n = scan.size();
  for (auto& e : edges) {
    if (e.u == e.v) throw InvalidArgument("make_graph: self-edges are not allowed");
    if (e.u >= n || e.v >= n) throw InvalidArgument("make_graph: edge index out of range");
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  ScanGraph graph;
  graph.options = options;
  graph.edge_class = label_edges(edges, scan.track_id);
  graph.degree.assign(n, 0);
  for (const auto& e : edges) {
    ++graph.degree[e.u];
    ++graph.degree[e.v];
  }
  graph.smoothing = smoothing_operator(n, edges, options.self_loops);
  graph.edges = std::move(edges);
  graph.scan = std::move(scan);
  return graph;
}

ScanGraph build_graph(LayerScan scan, const GraphOptions& options) {
  auto edges = knn_edges(scan.positions, options.k);
  return make_graph(std::move(scan), std::move(edges), options);
}

}  // namespace meltgraph
