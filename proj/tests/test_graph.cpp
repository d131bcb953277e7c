#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "glocal/error.hpp"
#include "glocal/graph.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace glocal;
using namespace glocal::graph;
using glocal::testing::TempDir;

namespace {

using EdgeList = std::vector<std::pair<Node, Node>>;

FeatureMatrix line_points(const std::vector<double>& xs) {
  FeatureMatrix m(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = float(xs[i]);
  return m;
}

DataGraph star(std::size_t leaves) {
  EdgeList e;
  for (Node i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return DataGraph(leaves + 1, e);
}

double residual(const DataGraph& g, const EigenCentrality& c) {
  // Scores are scaled per component; undo the scale before checking A e = kappa e.
  double worst = 0.0;
  for (Node p = 0; p < g.size(); ++p) {
    double ae = 0.0;
    for (Node q : g.neighbors(p)) ae += c.score[q];
    worst = std::max(worst, std::abs(ae - c.eigenvalue[p] * c.score[p]));
  }
  return worst;
}

}  // namespace

TEST(DataGraph, NormalizesEdges) {
  const EdgeList e{{1, 0}, {0, 1}, {2, 1}};
  const DataGraph g(3, e);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_EQ(g.edges(), (EdgeList{{0, 1}, {1, 2}}));
  EXPECT_TRUE(g.adjacent(2, 1));
  EXPECT_FALSE(g.adjacent(0, 2));
  EXPECT_EQ(g.slot(1, 2), 1);
  EXPECT_EQ(g.slot(0, 2), -1);
  EXPECT_THROW(DataGraph(2, EdgeList{{1, 1}}), DataError);
  EXPECT_THROW(DataGraph(2, EdgeList{{0, 2}}), ShapeError);
}

TEST(Knn, CollinearPointsWithTies) {
  // Node 1 is equidistant from 0 and 2; the smaller index wins, so 1 -> 0
  // and edge 1-2 exists only because 2 -> 1.
  const auto g = build_knn_graph(line_points({0, 1, 2, 10}), 1);
  EXPECT_EQ(g.edges(), (EdgeList{{0, 1}, {1, 2}, {2, 3}}));
  // 3 -> 2 only arrives through symmetrization.
  const auto g2 = build_knn_graph(line_points({0, 1, 2, 2.5, 10}), 1);
  EXPECT_TRUE(g2.adjacent(4, 3));
  EXPECT_EQ(g2.k_nn(), 1u);
}

TEST(Knn, SymmetricAndMinimumDegree) {
  const auto f = glocal::testing::random_matrix(60, 5, 9);
  const auto g = build_knn_graph(f, 4);
  for (Node p = 0; p < g.size(); ++p) {
    EXPECT_GE(g.degree(p), 4u);
    for (Node q : g.neighbors(p)) EXPECT_TRUE(g.adjacent(q, p));
    // The 4 nearest are neighbors.
    std::vector<std::pair<double, Node>> d;
    for (Node q = 0; q < g.size(); ++q) {
      if (q != p) d.emplace_back(euclidean(f.row(p), f.row(q)), q);
    }
    std::sort(d.begin(), d.end());
    for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(g.adjacent(p, d[i].second));
  }
  EXPECT_THROW(build_knn_graph(f, 0), ParamError);
  EXPECT_THROW(build_knn_graph(f, 60), ParamError);
}

TEST(Partition, StarCenterIsDense) {
  const auto part = split_dense_sparse(star(49));
  EXPECT_EQ(part.dense.size(), 1u);
  EXPECT_EQ(part.dense.node_id(0), 0u);
  EXPECT_EQ(part.sparse.size(), 49u);
  EXPECT_EQ(part.sparse.edge_count(), 0u);
  EXPECT_NEAR(part.degree_mean, 98.0 / 50.0, 1e-12);
  EXPECT_TRUE(part.is_dense[0]);
}

TEST(Partition, RegularGraphIsAllSparse) {
  EdgeList ring;
  for (Node i = 0; i < 10; ++i) ring.emplace_back(i, (i + 1) % 10);
  const auto part = split_dense_sparse(DataGraph(10, ring));
  EXPECT_TRUE(part.dense.empty());
  EXPECT_EQ(part.sparse.size(), 10u);
  EXPECT_EQ(part.degree_std, 0.0);
}

TEST(Partition, DisjointCover) {
  CounterRng rng{5};
  const auto g = oracle::random_graph(40, 0.1, rng);
  const auto part = split_dense_sparse(g);
  std::vector<int> seen(40, 0);
  for (auto id : part.dense.node_ids()) ++seen[id];
  for (auto id : part.sparse.node_ids()) ++seen[id];
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Induced, KeepsOriginalIds) {
  const DataGraph g(5, EdgeList{{0, 1}, {1, 2}, {2, 3}, {3, 4}}, 2, {10, 11, 12, 13, 14});
  const std::vector<Node> pick{3, 1, 2};
  const auto sub = g.induced(pick);
  EXPECT_EQ(sub.node_ids(), (std::vector<Node>{11, 12, 13}));
  EXPECT_EQ(sub.edges(), (EdgeList{{0, 1}, {1, 2}}));
  EXPECT_EQ(sub.k_nn(), 2u);
}

TEST(EigenCentrality, Triangle) {
  const auto c = eigen_centrality(DataGraph(3, EdgeList{{0, 1}, {1, 2}, {0, 2}}));
  for (double s : c.score) EXPECT_NEAR(s, 1.0 / std::sqrt(3.0), 1e-8);
  EXPECT_NEAR(c.kappa, 2.0, 1e-8);
}

TEST(EigenCentrality, PathOfThreeIsBipartite) {
  const auto c = eigen_centrality(DataGraph(3, EdgeList{{0, 1}, {1, 2}}));
  EXPECT_NEAR(c.score[0], 0.5, 1e-8);
  EXPECT_NEAR(c.score[1], std::sqrt(0.5), 1e-8);
  EXPECT_NEAR(c.score[2], 0.5, 1e-8);
  EXPECT_NEAR(c.kappa, std::sqrt(2.0), 1e-8);
}

TEST(EigenCentrality, EqualComponentsScoreEqually) {
  const auto c = eigen_centrality(DataGraph(7, EdgeList{{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}));
  for (Node p = 0; p < 6; ++p) EXPECT_NEAR(c.score[p], 1.0 / std::sqrt(7.0), 1e-8);
  EXPECT_EQ(c.score[6], 0.0);
  EXPECT_NE(c.component[0], c.component[3]);
  double norm = 0;
  for (double s : c.score) norm += s * s;
  EXPECT_NEAR(norm, 1.0 - 1.0 / 7.0, 1e-8);  // the isolated node contributes its zero vector
}

TEST(EigenCentrality, ResidualOnRandomGraphs) {
  CounterRng rng{6};
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + std::size_t(rng.below(49));
    const auto g = oracle::random_graph(n, rng.uniform(0.02, 0.5), rng);
    const auto c = eigen_centrality(g);
    EXPECT_LT(residual(g, c), 1e-6) << "graph " << t;
    for (double s : c.score) EXPECT_GE(s, 0.0);
  }
  EXPECT_THROW(eigen_centrality(DataGraph()), EmptyError);
}

TEST(Closeness, Star) {
  const auto c = closeness_centrality(star(3));
  EXPECT_DOUBLE_EQ(c[0], 4.0 / 3.0);
  for (Node p = 1; p < 4; ++p) EXPECT_DOUBLE_EQ(c[p], 4.0 / 5.0);
}

TEST(Closeness, IsolatedNodeIsZero) {
  const auto c = closeness_centrality(DataGraph(3, EdgeList{{0, 1}}));
  EXPECT_DOUBLE_EQ(c[0], 2.0);
  EXPECT_DOUBLE_EQ(c[2], 0.0);
}

TEST(Closeness, MatchesFloydWarshall) {
  CounterRng rng{7};
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 1 + std::size_t(rng.below(50));
    const auto g = oracle::random_graph(n, rng.uniform(0.0, 0.3), rng);
    EXPECT_EQ(closeness_centrality(g), oracle::closeness(g)) << "graph " << t;
    const auto fw = oracle::floyd_warshall(g);
    for (Node s = 0; s < n; ++s) EXPECT_EQ(bfs_distances(g, s), fw[s]);
  }
}

TEST(Density, HandComputed) {
  const DataGraph g(3, EdgeList{{0, 1}, {1, 2}});
  FeatureMatrix sa(3, 2, FeatureRole::LocalSA);
  sa(1, 0) = 3;
  sa(1, 1) = 4;  // |0-1| = 5
  sa(2, 0) = 3;
  sa(2, 1) = 6;  // |1-2| = 2
  const auto d = graph_density(g, sa, 1.0);
  EXPECT_NEAR(d.d_sa[0], std::exp(-2.5), 1e-15);
  EXPECT_NEAR(d.d_sa[1], 0.5 * (std::exp(-2.5) + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(d.d_sa[2], std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(relative_density(g, d, 1, 2), std::max(d.d_sa[2] - d.d_sa[1], kDensityFloor));
  EXPECT_DOUBLE_EQ(relative_density(g, d, 0, 2), d.d_sa[2]);
  EXPECT_DOUBLE_EQ(relative_density(g, d, 2, 2), d.d_sa[2]);
  EXPECT_DOUBLE_EQ(median_edge_distance(g, sa), 3.5);
  EXPECT_THROW(graph_density(g, sa, 0.0), ParamError);
}

TEST(Density, SubgraphLooksUpOriginalRows) {
  const DataGraph g(4, EdgeList{{0, 1}, {2, 3}});
  FeatureMatrix sa(4, 1, FeatureRole::LocalSA);
  sa(3, 0) = 2;
  const std::vector<Node> keep{2, 3};
  const auto sub = g.induced(keep);
  const auto d = graph_density(sub, sa, 1.0);
  EXPECT_NEAR(d.d_sa[0], std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(median_edge_distance(DataGraph(4, EdgeList{}), sa), 1.0);
  const auto iso = graph_density(DataGraph(2, EdgeList{}), sa, 1.0);
  EXPECT_EQ(iso.d_sa[0], kDensityFloor);
}

TEST(GraphFile, RoundTrip) {
  TempDir dir;
  CounterRng rng{8};
  auto g = oracle::random_graph(30, 0.2, rng);
  g = DataGraph(30, g.edges(), 6);
  save_graph(g, dir / "g.bin");
  const auto back = load_graph(dir / "g.bin");
  EXPECT_EQ(back.size(), 30u);
  EXPECT_EQ(back.k_nn(), 6u);
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_EQ(std::filesystem::file_size(dir / "g.bin"), 16 + 8 * g.edge_count());
}

TEST(GraphFile, RejectsMalformed) {
  TempDir dir;
  auto write = [&](const std::string& name, const std::string& bytes) {
    std::ofstream(dir / name, std::ios::binary) << bytes;
    return dir / name;
  };
  auto u32 = [](std::uint32_t v) {
    return std::string{char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char(v >> 24)};
  };
  EXPECT_THROW(load_graph(write("magic.bin", "GLGX" + u32(2) + u32(1) + u32(0))), FormatError);
  EXPECT_THROW(load_graph(write("short.bin", "GLGR" + u32(2) + u32(1) + u32(1))), FormatError);
  EXPECT_THROW(load_graph(write("order.bin", "GLGR" + u32(3) + u32(1) + u32(1) + u32(2) + u32(1))), FormatError);
  EXPECT_THROW(load_graph(write("range.bin", "GLGR" + u32(3) + u32(1) + u32(1) + u32(0) + u32(3))), FormatError);
  EXPECT_THROW(load_graph(write("sorted.bin", "GLGR" + u32(3) + u32(1) + u32(2) + u32(1) + u32(2) + u32(0) + u32(1))),
               FormatError);
  EXPECT_THROW(load_graph(dir / "missing.bin"), IoError);
}
