#include "glocal/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "glocal/error.hpp"
#include "glocal/parallel.hpp"

namespace glocal::graph {

namespace {

constexpr char kGraphMagic[4] = {'G', 'L', 'G', 'R'};
constexpr std::size_t kDenseFallbackLimit = 4096;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& bytes, std::size_t pos) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

}  // namespace

// ---------------------------------------------------------------------------
// DataGraph

DataGraph::DataGraph(std::size_t n, std::span<const std::pair<Node, Node>> edges, std::uint32_t k_nn,
                     std::vector<Node> node_ids)
    : node_ids_(std::move(node_ids)), k_nn_(k_nn) {
  if (node_ids_.empty()) {
    node_ids_.resize(n);
    std::iota(node_ids_.begin(), node_ids_.end(), Node{0});
  } else if (node_ids_.size() != n) {
    throw ShapeError("node id list does not match node count");
  }
  std::vector<std::vector<Node>> adj(n);
  for (auto [p, q] : edges) {
    if (p >= n || q >= n) throw ShapeError("edge endpoint out of range");
    if (p == q) throw DataError("self-loop on node " + std::to_string(p));
    adj[p].push_back(q);
    adj[q].push_back(p);
  }
  offsets_.assign(n + 1, 0);
  for (std::size_t p = 0; p < n; ++p) {
    std::sort(adj[p].begin(), adj[p].end());
    adj[p].erase(std::unique(adj[p].begin(), adj[p].end()), adj[p].end());
    offsets_[p + 1] = offsets_[p] + adj[p].size();
  }
  neighbors_.reserve(offsets_[n]);
  for (const auto& a : adj) neighbors_.insert(neighbors_.end(), a.begin(), a.end());
}

bool DataGraph::adjacent(Node p, Node q) const { return slot(p, q) >= 0; }

std::ptrdiff_t DataGraph::slot(Node p, Node q) const {
  auto nb = neighbors(p);
  auto it = std::lower_bound(nb.begin(), nb.end(), q);
  if (it == nb.end() || *it != q) return -1;
  return it - nb.begin();
}

std::vector<std::pair<Node, Node>> DataGraph::edges() const {
  std::vector<std::pair<Node, Node>> out;
  out.reserve(edge_count());
  for (Node p = 0; p < size(); ++p) {
    for (Node q : neighbors(p)) {
      if (p < q) out.emplace_back(p, q);
    }
  }
  return out;
}

DataGraph DataGraph::induced(std::span<const Node> nodes) const {
  std::vector<Node> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::int64_t> local(size(), -1);
  for (std::size_t i = 0; i < sorted.size(); ++i) local[sorted[i]] = std::int64_t(i);
  std::vector<std::pair<Node, Node>> sub_edges;
  std::vector<Node> ids(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Node p = sorted[i];
    ids[i] = node_ids_[p];
    for (Node q : neighbors(p)) {
      if (p < q && local[q] >= 0) sub_edges.emplace_back(Node(i), Node(local[q]));
    }
  }
  return DataGraph(sorted.size(), sub_edges, k_nn_, std::move(ids));
}

// ---------------------------------------------------------------------------
// Construction

double euclidean(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

DataGraph build_knn_graph(const FeatureMatrix& f_ae, std::uint32_t k) {
  const std::size_t n = f_ae.rows();
  if (k == 0 || k >= n) {
    throw ParamError("k-NN graph needs 1 <= k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::vector<Node>> nearest(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, Node>> cand(n - 1);
    for (std::size_t p = begin; p < end; ++p) {
      std::size_t c = 0;
      for (std::size_t q = 0; q < n; ++q) {
        if (q != p) cand[c++] = {euclidean(f_ae.row(p), f_ae.row(q)), Node(q)};
      }
      // Pair ordering breaks distance ties by the smaller index.
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
      nearest[p].resize(k);
      for (std::size_t i = 0; i < k; ++i) nearest[p][i] = cand[i].second;
    }
  });
  std::vector<std::pair<Node, Node>> edges;
  edges.reserve(n * k);
  for (std::size_t p = 0; p < n; ++p) {
    for (Node q : nearest[p]) edges.emplace_back(Node(p), q);
  }
  return DataGraph(n, edges, k);
}

GraphPartition split_dense_sparse(const DataGraph& g) {
  GraphPartition part;
  const std::size_t n = g.size();
  part.is_dense.assign(n, false);
  if (n == 0) return part;
  double sum = 0.0;
  for (Node p = 0; p < n; ++p) sum += double(g.degree(p));
  part.degree_mean = sum / double(n);
  double ss = 0.0;
  for (Node p = 0; p < n; ++p) {
    const double d = double(g.degree(p)) - part.degree_mean;
    ss += d * d;
  }
  part.degree_std = std::sqrt(ss / double(n));
  part.tau_d = part.degree_mean + 3.0 * part.degree_std;
  std::vector<Node> dense;
  std::vector<Node> sparse;
  for (Node p = 0; p < n; ++p) {
    if (double(g.degree(p)) > part.tau_d) {
      part.is_dense[p] = true;
      dense.push_back(p);
    } else {
      sparse.push_back(p);
    }
  }
  part.dense = g.induced(dense);
  part.sparse = g.induced(sparse);
  return part;
}

// ---------------------------------------------------------------------------
// Centralities

std::vector<std::size_t> connected_components(const DataGraph& g) {
  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(g.size(), none);
  std::size_t next = 0;
  std::vector<Node> stack;
  for (Node s = 0; s < g.size(); ++s) {
    if (label[s] != none) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const Node p = stack.back();
      stack.pop_back();
      for (Node q : g.neighbors(p)) {
        if (label[q] == none) {
          label[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  return label;
}

EigenCentrality eigen_centrality(const DataGraph& g, const PowerIterationOptions& options) {
  const std::size_t n = g.size();
  if (n == 0) throw EmptyError("eigen_centrality on an empty graph");
  EigenCentrality out;
  out.score.assign(n, 0.0);
  out.eigenvalue.assign(n, 0.0);
  out.component = connected_components(g);
  const std::size_t n_comp = *std::max_element(out.component.begin(), out.component.end()) + 1;
  std::vector<std::vector<Node>> members(n_comp);
  for (Node p = 0; p < n; ++p) members[out.component[p]].push_back(p);

  std::vector<std::int64_t> local(n, -1);
  for (const auto& nodes : members) {
    const std::size_t m = nodes.size();
    for (std::size_t i = 0; i < m; ++i) local[nodes[i]] = std::int64_t(i);
    auto multiply = [&](const std::vector<double>& x, std::vector<double>& y) {
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (Node q : g.neighbors(nodes[i])) s += x[std::size_t(local[q])];
        y[i] = s;
      }
    };

    std::vector<double> e(m, 1.0 / std::sqrt(double(m)));
    std::vector<double> ae(m);
    double kappa = 0.0;
    double residual = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    for (;; ++it) {
      multiply(e, ae);
      kappa = std::inner_product(e.begin(), e.end(), ae.begin(), 0.0);
      residual = 0.0;
      for (std::size_t i = 0; i < m; ++i) residual = std::max(residual, std::abs(ae[i] - kappa * e[i]));
      if (residual < options.tolerance || it >= options.max_iterations) break;
      // Shift by the identity so bipartite components do not oscillate.
      double norm = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        e[i] = ae[i] + e[i];
        norm += e[i] * e[i];
      }
      norm = std::sqrt(norm);
      for (double& v : e) v /= norm;
    }
    out.iterations = std::max(out.iterations, it);

    if (residual >= options.tolerance) {
      // Small spectral gap: fall back to a dense symmetric solve when affordable.
      if (m > kDenseFallbackLimit) throw SolverError("eigen-centrality power iteration did not converge", residual);
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(Eigen::Index(m), Eigen::Index(m));
      for (std::size_t i = 0; i < m; ++i) {
        for (Node q : g.neighbors(nodes[i])) a(Eigen::Index(i), local[q]) = 1.0;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
      kappa = eig.eigenvalues()[Eigen::Index(m) - 1];
      const Eigen::VectorXd v = eig.eigenvectors().col(Eigen::Index(m) - 1);
      for (std::size_t i = 0; i < m; ++i) e[i] = v[Eigen::Index(i)];
    }

    // An isolated node influences nobody.
    const double scale = m == 1 ? 0.0 : std::sqrt(double(m) / double(n));
    for (std::size_t i = 0; i < m; ++i) {
      out.score[nodes[i]] = std::abs(e[i]) * scale;
      out.eigenvalue[nodes[i]] = kappa;
    }
    out.kappa = std::max(out.kappa, kappa);
  }
  return out;
}

std::vector<int> bfs_distances(const DataGraph& g, Node source) {
  std::vector<int> dist(g.size(), -1);
  std::deque<Node> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const Node p = queue.front();
    queue.pop_front();
    for (Node q : g.neighbors(p)) {
      if (dist[q] < 0) {
        dist[q] = dist[p] + 1;
        queue.push_back(q);
      }
    }
  }
  return dist;
}

std::vector<double> closeness_centrality(const DataGraph& g) {
  if (g.empty()) throw EmptyError("closeness_centrality on an empty graph");
  std::vector<double> out(g.size(), 0.0);
  parallel_for(g.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto dist = bfs_distances(g, Node(p));
      std::uint64_t total = 0;
      std::uint64_t reach = 0;
      for (int d : dist) {
        if (d >= 0) {
          total += std::uint64_t(d);
          ++reach;
        }
      }
      out[p] = total == 0 ? 0.0 : double(reach) / double(total);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Density

DensityVector graph_density(const DataGraph& g, const FeatureMatrix& f_sa, double sigma_den) {
  if (!(sigma_den > 0.0)) throw ParamError("sigma_den must be positive");
  DensityVector out;
  out.sigma_den = sigma_den;
  out.d_sa.assign(g.size(), kDensityFloor);
  const double denom = 2.0 * sigma_den * sigma_den;
  for (Node q = 0; q < g.size(); ++q) {
    const auto nb = g.neighbors(q);
    if (nb.empty()) continue;
    double s = 0.0;
    for (Node p : nb) s += std::exp(-euclidean(f_sa.row(g.node_id(p)), f_sa.row(g.node_id(q))) / denom);
    out.d_sa[q] = s / double(nb.size());
  }
  return out;
}

double relative_density(const DataGraph& g, const DensityVector& density, Node p, Node q) {
  const double a = (p != q && g.adjacent(p, q)) ? 1.0 : 0.0;
  return std::max(density.d_sa[q] - a * density.d_sa[p], kDensityFloor);
}

double median_edge_distance(const DataGraph& g, const FeatureMatrix& f_sa) {
  std::vector<double> d;
  for (auto [p, q] : g.edges()) d.push_back(euclidean(f_sa.row(g.node_id(p)), f_sa.row(g.node_id(q))));
  if (d.empty()) return 1.0;
  std::sort(d.begin(), d.end());
  const std::size_t h = d.size() / 2;
  const double median = d.size() % 2 ? d[h] : 0.5 * (d[h - 1] + d[h]);
  return median > 0.0 ? median : 1.0;
}

// ---------------------------------------------------------------------------
// Serialization

void save_graph(const DataGraph& g, const std::filesystem::path& path) {
  std::string out(kGraphMagic, 4);
  const auto edges = g.edges();
  put_u32(out, std::uint32_t(g.size()));
  put_u32(out, g.k_nn());
  put_u32(out, std::uint32_t(edges.size()));
  for (auto [p, q] : edges) {
    put_u32(out, p);
    put_u32(out, q);
  }
  write_text_file(path, out);
}

DataGraph load_graph(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kGraphMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a GLGR graph file");
  }
  const std::uint32_t n = get_u32(bytes, 4);
  const std::uint32_t k = get_u32(bytes, 8);
  const std::uint32_t m = get_u32(bytes, 12);
  if (bytes.size() != 16 + std::size_t(m) * 8) throw FormatError(path.string() + ": edge payload size mismatch");
  std::vector<std::pair<Node, Node>> edges(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    const Node p = get_u32(bytes, 16 + 8 * std::size_t(i));
    const Node q = get_u32(bytes, 20 + 8 * std::size_t(i));
    if (p >= q || q >= n) throw FormatError(path.string() + ": edge " + std::to_string(i) + " is not a sorted pair");
    if (i > 0 && !(edges[i - 1] < std::pair{p, q})) throw FormatError(path.string() + ": edges are not sorted");
    edges[i] = {p, q};
  }
  return DataGraph(n, edges, k);
}

}  // namespace glocal::graph
