#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "glocal/io.hpp"

namespace glocal::graph {

using Node = std::uint32_t;

/// Undirected simple graph in CSR form. Node p of this graph corresponds to
/// row node_ids[p] of the feature matrices; induced subgraphs keep the
/// original row ids so features can be looked up directly.
class DataGraph {
 public:
  DataGraph() = default;
  /// Edges are undirected pairs of local indices; duplicates and orientation
  /// are normalized, self-loops rejected.
  DataGraph(std::size_t n, std::span<const std::pair<Node, Node>> edges, std::uint32_t k_nn = 0,
            std::vector<Node> node_ids = {});

  std::size_t size() const noexcept { return node_ids_.size(); }
  bool empty() const noexcept { return node_ids_.empty(); }
  std::uint32_t k_nn() const noexcept { return k_nn_; }
  Node node_id(Node p) const { return node_ids_[p]; }
  const std::vector<Node>& node_ids() const noexcept { return node_ids_; }

  std::span<const Node> neighbors(Node p) const {
    return {neighbors_.data() + offsets_[p], offsets_[p + 1] - offsets_[p]};
  }
  std::size_t degree(Node p) const { return offsets_[p + 1] - offsets_[p]; }
  bool adjacent(Node p, Node q) const;
  /// Position of q inside neighbors(p), or -1.
  std::ptrdiff_t slot(Node p, Node q) const;
  std::size_t edge_count() const noexcept { return neighbors_.size() / 2; }
  /// Sorted (p < q) pairs.
  std::vector<std::pair<Node, Node>> edges() const;
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }

  /// Induced subgraph on `nodes` (local indices of this graph, any order).
  /// The result orders nodes ascending by local index.
  DataGraph induced(std::span<const Node> nodes) const;

 private:
  std::vector<Node> node_ids_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Node> neighbors_;
  std::uint32_t k_nn_ = 0;
};

inline constexpr std::uint32_t kDefaultK = 10;

/// Directed k-NN by Euclidean distance (ties to the smaller index), then
/// symmetrized with A(p,q) = max(A_knn(p,q), A_knn(q,p)).
DataGraph build_knn_graph(const FeatureMatrix& f_ae, std::uint32_t k);

struct GraphPartition {
  DataGraph dense;
  DataGraph sparse;
  double tau_d = 0.0;
  double degree_mean = 0.0;
  double degree_std = 0.0;
  std::vector<bool> is_dense;  // per node of the partitioned graph
};

/// Nodes with degree > mean + 3 std (population) form the dense subgraph.
GraphPartition split_dense_sparse(const DataGraph& g);

struct EigenCentrality {
  std::vector<double> score;       // nonnegative; unit L2 when no node is isolated
  std::vector<double> eigenvalue;  // dominant eigenvalue of each node's component
  std::vector<std::size_t> component;
  double kappa = 0.0;  // largest over components
  std::size_t iterations = 0;
};

struct PowerIterationOptions {
  std::size_t max_iterations = 1000;
  double tolerance = 1e-8;
};

/// Dominant adjacency eigenvector, per connected component. Each component's
/// unit eigenvector is scaled by sqrt(|component| / n) so the concatenation
/// has unit norm and components of equal shape score equally. Isolated nodes
/// score 0.
EigenCentrality eigen_centrality(const DataGraph& g, const PowerIterationOptions& options = {});

/// Connected component label per node, labels in order of first appearance.
std::vector<std::size_t> connected_components(const DataGraph& g);

/// Unweighted BFS hop counts from `source`; -1 when unreachable.
std::vector<int> bfs_distances(const DataGraph& g, Node source);

/// n_reach / sum of hop distances to reachable nodes; 0 for isolated nodes.
std::vector<double> closeness_centrality(const DataGraph& g);

inline constexpr double kDensityFloor = 1e-6;

struct DensityVector {
  std::vector<double> d_sa;  // per node of the graph it was computed on
  double sigma_den = 1.0;
};

/// Neighbor-averaged exp(-||f_SA(p) - f_SA(q)|| / (2 sigma^2)); isolated nodes get the floor.
DensityVector graph_density(const DataGraph& g, const FeatureMatrix& f_sa, double sigma_den);

/// Density of q as seen from a step that starts at p: max(D(q) - A(p,q) D(p), floor).
double relative_density(const DataGraph& g, const DensityVector& density, Node p, Node q);

/// Median over edges of ||f_SA(p) - f_SA(q)||; 1 when the graph has no edges
/// or the median is zero.
double median_edge_distance(const DataGraph& g, const FeatureMatrix& f_sa);

double euclidean(std::span<const float> a, std::span<const float> b);

/// "GLGR" magic then u32 LE n, k, edge count, then sorted (p < q) u32 pairs of
/// local indices. Node ids are not stored; a loaded graph has ids 0..n-1.
void save_graph(const DataGraph& g, const std::filesystem::path& path);
DataGraph load_graph(const std::filesystem::path& path);

}  // namespace glocal::graph
