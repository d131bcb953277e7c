#pragma once

// Random-walk sampling over the k-NN data graph.
//
// One-time sampling seeds walks at the most central nodes of the dense and
// sparse subgraphs and keeps the most visited nodes. Incremental sampling
// repeats this in batches, steering walks with a cumulative
// informativeness score gathered by budget-limited walks from the current
// selection, and stops once the normalized score stops moving.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "glocal/graph.hpp"
#include "glocal/io.hpp"
#include "glocal/rng.hpp"

namespace glocal::sampling {

using graph::DataGraph;
using graph::GraphPartition;
using graph::Node;

struct ScaleBounds {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr double kCostFloor = 1e-6;
inline constexpr std::size_t kDefaultWalkCap = 10'000;

/// Shared read-only state for every walk. Indices into features, densities
/// and score vectors are row ids of the full graph; the referenced graph and
/// matrices must outlive the context.
struct WalkContext {
  const DataGraph* graph = nullptr;  // full graph (node p has row id p)
  const FeatureMatrix* f_ae = nullptr;
  const FeatureMatrix* f_sa = nullptr;
  std::vector<double> sa_norm;
  std::vector<bool> is_dense;  // partition class per full-graph node
  graph::DensityVector density;
  ScaleBounds psi_ae;  // AE distances over all edges
  ScaleBounds psi_sa;  // SA distances over all edges
  std::uint64_t rng_seed = 0;
  std::size_t max_walk_steps = kDefaultWalkCap;
  double budget = 0.0;  // informativeness walk budget, the graph's k
};

/// sigma_den <= 0 selects the median edge distance in f_SA.
WalkContext make_walk_context(const DataGraph& g, const GraphPartition& part, const FeatureMatrix& f_ae,
                              const FeatureMatrix& f_sa, double sigma_den, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Per-edge quantities. p and q are local nodes of `g`, which is the full
// graph or one of its induced subgraphs.

double minmax_scale(double x, const ScaleBounds& bounds);

/// Cosine similarity of f_SA rows (row ids). Zero-norm rows raise DataError.
double cosine_similarity(const WalkContext& ctx, Node row_a, Node row_b);

/// Sorted intersection of the one-ring neighborhoods of p and q.
std::vector<Node> common_neighbors(const DataGraph& g, Node p, Node q);

/// S_cos(p,q) minus the mean S_cos over all pairs of common neighbors (0 when fewer than two).
double similarity_excess(const DataGraph& g, Node p, Node q, const WalkContext& ctx);

/// Breadth-leaning weight: S_cos(p,q) + sum_r S(p,r) S(q,r) / (1 + ln d_q).
double visit_weight_dense(const DataGraph& g, Node p, Node q, const WalkContext& ctx);

/// Depth-leaning weight: |Psi(AE dist) - Psi(SA dist)| / (1 + ln d_q).
double visit_weight_sparse(const DataGraph& g, Node p, Node q, const WalkContext& ctx);

enum class WalkMode { Dense, Sparse };

/// Incremental weights, reweighted by the cumulative informativeness i_cum
/// (indexed by row id).
double tendency_weight(const DataGraph& g, Node p, Node q, const WalkContext& ctx, std::span<const double> i_cum,
                       WalkMode mode);

/// Clamps negatives to zero and normalizes; uniform when nothing is positive.
std::vector<double> transition_probabilities(std::span<const double> weights);

/// Per-node transition distributions over each node's neighbor list.
class TransitionTable {
 public:
  TransitionTable() = default;
  /// slot_weights follows the CSR neighbor order of g.
  TransitionTable(const DataGraph& g, std::span<const double> slot_weights);

  std::span<const double> probabilities(Node p) const;
  const DataGraph& graph() const { return *graph_; }

 private:
  const DataGraph* graph_ = nullptr;
  std::vector<double> prob_;
  std::vector<double> cumulative_;
  friend Node rw_step(const TransitionTable&, Node, CounterRng&);
};

TransitionTable dense_table(const DataGraph& g, const WalkContext& ctx);
TransitionTable sparse_table(const DataGraph& g, const WalkContext& ctx);
TransitionTable tendency_table(const DataGraph& g, const WalkContext& ctx, std::span<const double> i_cum,
                               WalkMode mode);
/// Full-graph tendency table where each node uses the weight of its own class.
TransitionTable mixed_tendency_table(const WalkContext& ctx, std::span<const double> i_cum);

/// Draws the next node from p. Throws WalkError when p has no neighbors.
Node rw_step(const TransitionTable& table, Node p, CounterRng& rng);

/// Fixed-length walks: `epochs` walks of `steps` steps from each origin. The
/// origin and every arrival count as one visit. Stream key per walk is
/// (seed, phase, subgraph, origin row id, epoch). Result is per local node.
std::vector<std::uint64_t> walk_visits(const TransitionTable& table, std::span<const Node> origins,
                                       std::size_t epochs, std::size_t steps, std::uint64_t seed,
                                       std::uint64_t phase, std::uint64_t subgraph);

// ---------------------------------------------------------------------------
// Budget walks

/// AE distance times the relative-density ratio, floored at kCostFloor.
double step_cost(double ae_distance, double dhat_origin, double dhat_dest);
/// Cost of the full-graph edge p -> q.
double step_cost(Node p, Node q, const WalkContext& ctx);

struct BudgetWalkStats {
  std::size_t walks = 0;
  std::size_t capped = 0;  // walks cut off at the step cap
  std::size_t steps = 0;
};

/// `epochs` walks per origin; each starts with `budget`, pays slot_cost per
/// move and stops once the budget drops below zero, at the step cap, or at a
/// node without neighbors.
std::vector<std::uint64_t> budget_walk_visits(const TransitionTable& table, std::span<const double> slot_cost,
                                              std::span<const Node> origins, std::size_t epochs, double budget,
                                              std::size_t step_cap, std::uint64_t seed, std::uint64_t phase,
                                              BudgetWalkStats* stats = nullptr);

/// Full-graph step costs in CSR slot order.
std::vector<double> step_cost_table(const WalkContext& ctx);

struct IScoreVector {
  std::vector<double> i;             // this iteration
  std::vector<double> i_cumulative;  // running total
};

/// Visit totals of budget-limited walks from every selected node (row ids),
/// steered by tendency weights built from `i_cum_prev`.
std::vector<double> informativeness_score(const WalkContext& ctx, std::span<const Node> selected,
                                          std::size_t m_epochs, std::span<const double> i_cum_prev,
                                          std::uint64_t iteration = 1, BudgetWalkStats* stats = nullptr);

/// -sum_k |Ibar_now(k) - Ibar_prev(k)| * log2(Ibar_prev(k) + rho), Ibar = I / max(I).
double stop_criterion(std::span<const double> i_cum_now, std::span<const double> i_cum_prev, double rho);

// ---------------------------------------------------------------------------
// Sampling drivers

struct SampleSet {
  std::vector<Node> selected;             // row ids, in selection order
  std::vector<std::uint64_t> pick_visits;  // visits that ranked each pick
  std::vector<std::size_t> iteration;     // 0 for the one-time batch
  std::vector<std::uint64_t> visits;      // per row id, summed over all ranking walks

  std::size_t size() const { return selected.size(); }
};

/// Dense quota is max(1, round(total * dense / n)) when the dense side is
/// non-empty; both quotas are truncated to their subgraph sizes.
std::pair<std::size_t, std::size_t> split_quota(std::size_t total, std::size_t dense, std::size_t sparse);

/// Indices of the `count` largest values; ties go to the smaller index.
template <typename T>
std::vector<std::size_t> top_indices(std::span<const T> values, std::size_t count) {
  std::vector<std::size_t> idx(values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  count = std::min(count, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(count), idx.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b] || (values[a] == values[b] && a < b);
  });
  idx.resize(count);
  return idx;
}

SampleSet one_time_sampling(const GraphPartition& part, std::size_t n_s, std::size_t m_epochs,
                            const WalkContext& ctx);

enum class StopReason { Criterion, AllSelected, BatchLimit };

struct IncrementalResult {
  SampleSet samples;
  IScoreVector scores;
  std::vector<double> loss_history;  // one entry per evaluated iteration
  std::size_t batches = 0;
  StopReason reason = StopReason::Criterion;
};

IncrementalResult incremental_sampling(const GraphPartition& part, std::size_t n_s_per_batch, std::size_t m_epochs,
                                       const WalkContext& ctx, std::size_t max_batches = 0);

}  // namespace glocal::sampling
