#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "meltgraph/error.hpp"
#include "meltgraph/graph_build.hpp"
#include "support/helpers.hpp"

using namespace meltgraph;

namespace {

Matrix positions_of(const std::vector<std::pair<double, double>>& pts) {
  Matrix m(pts.size(), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    m(i, 0) = pts[i].first;
    m(i, 1) = pts[i].second;
  }
  return m;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> as_pairs(const std::vector<Edge>& edges) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& e : edges) out.push_back({e.u, e.v});
  return out;
}

std::vector<std::pair<double, double>> random_points(std::size_t n, std::uint64_t seed, bool lattice) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> g(0, 6);
  std::vector<std::pair<double, double>> pts(n);
  for (auto& p : pts) p = lattice ? std::pair<double, double>{g(rng) * 0.5, g(rng) * 0.5} : std::pair{u(rng), u(rng)};
  return pts;
}

std::vector<Edge> path_graph(std::uint32_t n) {
  std::vector<Edge> e;
  for (std::uint32_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return e;
}

}  // namespace

TEST(Knn, TwoNodesGiveOneEdge) {
  const auto edges = knn_edges(positions_of({{0, 0}, {1, 0}}), 1);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_EQ(edges[0], (Edge{0, 1}));
}

TEST(Knn, CollinearEquispacedMatchesOracle) {
  const std::vector<std::pair<double, double>> pts = {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}};
  const auto edges = knn_edges(positions_of(pts), 2);
  const auto expected = oracle::knn(pts, 2);
  const auto pairs = as_pairs(edges);
  EXPECT_EQ(std::set(pairs.begin(), pairs.end()), expected);
  const std::set<std::pair<std::uint32_t, std::uint32_t>> literal = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}, {2, 4}};
  EXPECT_EQ(expected, literal);
}

TEST(Knn, RandomAndTiedPointsMatchBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const bool lattice = seed % 2 == 1;
    const auto pts = random_points(40, seed, lattice);
    for (std::size_t k : {1u, 3u, 6u}) {
      const auto edges = knn_edges(positions_of(pts), k);
      const auto pairs = as_pairs(edges);
      EXPECT_EQ(std::set(pairs.begin(), pairs.end()), oracle::knn(pts, k)) << "seed " << seed << " k " << k;
      EXPECT_TRUE(std::is_sorted(edges.begin(), edges.end()));
    }
  }
}

TEST(Knn, DuplicatePointsHaveNoSelfEdges) {
  const std::vector<std::pair<double, double>> pts = {{0, 0}, {0, 0}, {0, 0}, {1, 1}};
  const auto edges = knn_edges(positions_of(pts), 2);
  for (const auto& e : edges) EXPECT_LT(e.u, e.v);
  const auto pairs = as_pairs(edges);
  EXPECT_EQ(std::set(pairs.begin(), pairs.end()), oracle::knn(pts, 2));
}

TEST(Knn, KAtLeastNIsRejected) {
  EXPECT_THROW(knn_edges(positions_of({{0, 0}, {1, 0}}), 2), InvalidArgument);
}

TEST(LabelEdges, ClassFollowsTrackRelation) {
  const std::vector<std::int64_t> tracks = {3, 3, 4};
  const std::vector<Edge> edges = {{0, 1}, {1, 2}};
  const auto cls = label_edges(edges, tracks);
  EXPECT_EQ(cls[0], EdgeClass::kSameTrack);
  EXPECT_EQ(cls[1], EdgeClass::kAdjacentTrack);
  const std::vector<std::int64_t> one_track = {0, 0, 0};
  for (auto c : label_edges(edges, one_track)) EXPECT_EQ(c, EdgeClass::kSameTrack);
}

TEST(Smoothing, PathOfThreeWithoutSelfLoops) {
  const auto op = smoothing_operator(3, path_graph(3), false);
  const std::vector<double> z = {1, 0, 0};
  const auto out = apply_smoothing(op, z);
  EXPECT_NEAR(out[0], 0.0, 1e-15);
  EXPECT_NEAR(out[1], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(out[2], 0.0, 1e-15);
}

TEST(Smoothing, PathOfThreeWithSelfLoops) {
  const auto op = smoothing_operator(3, path_graph(3), true);
  const std::vector<double> z = {1, 0, 0};
  const auto out = apply_smoothing(op, z);
  EXPECT_NEAR(out[0], 0.5, 1e-15);
  EXPECT_NEAR(out[1], 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(out[2], 0.0, 1e-15);
}

TEST(Smoothing, MatchesDenseOracleEntrywise) {
  for (bool self_loops : {false, true}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const std::size_t n = 200;
      const auto pts = random_points(n, 100 + seed, false);
      const auto edges = knn_edges(positions_of(pts), 4);
      const auto op = smoothing_operator(n, edges, self_loops);
      const auto dense = oracle::smoothing(n, as_pairs(edges), self_loops);
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(op.matrix.at(i, j) - dense[i][j]));
      EXPECT_LT(worst, 1e-12);

      std::mt19937_64 rng(seed);
      std::normal_distribution<double> g;
      std::vector<double> z(n);
      for (auto& v : z) v = g(rng);
      const auto out = apply_smoothing(op, z);
      for (std::size_t i = 0; i < n; ++i) {
        double expected = 0.0;
        for (std::size_t j = 0; j < n; ++j) expected += dense[i][j] * z[j];
        EXPECT_NEAR(out[i], expected, 1e-12);
      }
    }
  }
}

TEST(Smoothing, OperatorIsSymmetricWithEntriesInUnitInterval) {
  const auto pts = random_points(60, 7, false);
  const auto op = smoothing_operator(60, knn_edges(positions_of(pts), 5), true);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t p = op.matrix.row_ptr[i]; p < op.matrix.row_ptr[i + 1]; ++p) {
      const double v = op.matrix.values[p];
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_DOUBLE_EQ(v, op.matrix.at(op.matrix.col_idx[p], i));
    }
  }
}

TEST(Smoothing, ConstantIsFixedPointOnRegularGraph) {
  // 12-cycle: 2-regular.
  std::vector<Edge> cycle = path_graph(12);
  cycle.push_back({0, 11});
  const auto op = smoothing_operator(12, cycle, false);
  const std::vector<double> c(12, 2.5);
  for (double v : apply_smoothing(op, c)) EXPECT_NEAR(v, 2.5, 1e-15);
}

TEST(Smoothing, MassPreservedOnRegularGraph) {
  std::vector<Edge> cycle = path_graph(30);
  cycle.push_back({0, 29});
  const auto op = smoothing_operator(30, cycle, false);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> z(30);
  for (auto& v : z) v = g(rng);
  const auto out = apply_smoothing(op, z);
  EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), std::accumulate(z.begin(), z.end(), 0.0), 1e-9);
}

TEST(Smoothing, LinearAndZeroPreserving) {
  const auto pts = random_points(50, 11, false);
  const auto op = smoothing_operator(50, knn_edges(positions_of(pts), 3), true);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> z1(50), z2(50), combo(50);
  for (std::size_t i = 0; i < 50; ++i) {
    z1[i] = g(rng);
    z2[i] = g(rng);
    combo[i] = 2.0 * z1[i] - 0.5 * z2[i];
  }
  const auto s1 = apply_smoothing(op, z1), s2 = apply_smoothing(op, z2), sc = apply_smoothing(op, combo);
  for (std::size_t i = 0; i < 50; ++i) {
    const double expected = 2.0 * s1[i] - 0.5 * s2[i];
    EXPECT_NEAR(sc[i], expected, 1e-10 * std::max(1.0, std::abs(expected)));
  }
  for (double v : apply_smoothing(op, std::vector<double>(50, 0.0))) EXPECT_EQ(v, 0.0);
}

TEST(Smoothing, SpikeSpreadsOnlyToNeighbours) {
  // 10 x 10 grid graph.
  std::vector<Edge> grid;
  auto id = [](std::uint32_t r, std::uint32_t c) { return r * 10 + c; };
  for (std::uint32_t r = 0; r < 10; ++r)
    for (std::uint32_t c = 0; c < 10; ++c) {
      if (c + 1 < 10) grid.push_back({id(r, c), id(r, c + 1)});
      if (r + 1 < 10) grid.push_back({id(r, c), id(r + 1, c)});
    }
  std::vector<double> z(100, 0.0);
  z[id(4, 4)] = 1.0;
  for (bool self_loops : {false, true}) {
    const auto out = apply_smoothing(smoothing_operator(100, grid, self_loops), z);
    std::set<std::uint32_t> support;
    for (std::uint32_t i = 0; i < 100; ++i)
      if (out[i] != 0.0) support.insert(i);
    std::set<std::uint32_t> expected = {id(3, 4), id(5, 4), id(4, 3), id(4, 5)};
    if (self_loops) expected.insert(id(4, 4));
    EXPECT_EQ(support, expected);
  }
}

TEST(Smoothing, IsolatedNodeWithoutSelfLoopsIsRejected) {
  EXPECT_THROW(smoothing_operator(3, path_graph(2), false), InvalidArgument);
  EXPECT_NO_THROW(smoothing_operator(3, path_graph(2), true));
}

TEST(Smoothing, LengthMismatchIsRejected) {
  const auto op = smoothing_operator(3, path_graph(3), true);
  EXPECT_THROW(apply_smoothing(op, std::vector<double>(4, 0.0)), DimensionError);
}

TEST(ScanGraphBuild, InvariantsOnDefaultGeometry) {
  const auto graph = build_graph(testing_support::tiny_layer(1.0, 1.0));
  const std::size_t n = graph.n_nodes();
  ASSERT_GT(n, 0u);
  std::vector<std::size_t> degree(n, 0);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto [u, v] = graph.edges[e];
    EXPECT_LT(u, v);
    ++degree[u];
    ++degree[v];
    const bool same = graph.scan.track_id[u] == graph.scan.track_id[v];
    EXPECT_EQ(graph.edge_class[e], same ? EdgeClass::kSameTrack : EdgeClass::kAdjacentTrack);
  }
  EXPECT_TRUE(std::adjacent_find(graph.edges.begin(), graph.edges.end()) == graph.edges.end());
  EXPECT_EQ(degree, graph.degree);
  for (auto d : degree) EXPECT_GT(d, 0u);
}

TEST(ScanGraphBuild, InteriorNodesReachAdjacentTrackWithDefaultK) {
  const auto graph = build_graph(testing_support::tiny_layer(1.0, 1.0));
  const auto& scan = graph.scan;
  const auto last_track = scan.track_id.back();
  std::vector<bool> has_cross(graph.n_nodes(), false);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    if (graph.edge_class[e] == EdgeClass::kAdjacentTrack) has_cross[graph.edges[e].u] = has_cross[graph.edges[e].v] = true;
  }
  for (std::size_t i = 0; i < graph.n_nodes(); ++i) {
    if (scan.track_id[i] == 0 || scan.track_id[i] == last_track) continue;
    EXPECT_TRUE(has_cross[i]) << "node " << i;
  }
}

TEST(ScanGraphBuild, InteriorNodesReachAdjacentTrackForSmallKOnSquarePitch) {
  LayerSpec spec;
  spec.width_mm = 1.0;
  spec.height_mm = 1.0;
  spec.node_spacing_mm = spec.hatch_spacing_mm;
  const auto scan = generate_scan_path(spec);
  for (std::size_t k = 2; k <= 6; ++k) {
    GraphOptions options;
    options.k = k;
    const auto graph = build_graph(scan, options);
    std::vector<bool> has_cross(graph.n_nodes(), false);
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      if (graph.edge_class[e] == EdgeClass::kAdjacentTrack) has_cross[graph.edges[e].u] = has_cross[graph.edges[e].v] = true;
    }
    for (std::size_t i = 0; i < graph.n_nodes(); ++i) {
      if (scan.track_id[i] == 0 || scan.track_id[i] == scan.track_id.back()) continue;
      EXPECT_TRUE(has_cross[i]) << "k " << k << " node " << i;
    }
  }
}

TEST(DirectedEdges, BothDirectionsOrderedByDestination) {
  const auto index = testing_support::five_node_index();
  EXPECT_EQ(index.size(), 2 * testing_support::five_node_edges().size());
  for (std::size_t e = 1; e < index.size(); ++e) {
    EXPECT_TRUE(std::pair(index.dst[e - 1], index.src[e - 1]) < std::pair(index.dst[e], index.src[e]));
  }
}
