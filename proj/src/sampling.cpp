#include "glocal/sampling.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>

#include "glocal/error.hpp"
#include "glocal/parallel.hpp"

namespace glocal::sampling {

namespace {

using graph::euclidean;

double ae_distance(const WalkContext& ctx, Node a, Node b) { return euclidean(ctx.f_ae->row(a), ctx.f_ae->row(b)); }
double sa_distance(const WalkContext& ctx, Node a, Node b) { return euclidean(ctx.f_sa->row(a), ctx.f_sa->row(b)); }

double degree_factor(const DataGraph& g, Node q) { return 1.0 / (1.0 + std::log(double(g.degree(q)))); }

double psi_gap(const DataGraph& g, Node p, Node q, const WalkContext& ctx) {
  const Node a = g.node_id(p);
  const Node b = g.node_id(q);
  return std::abs(minmax_scale(ae_distance(ctx, a, b), ctx.psi_ae) -
                  minmax_scale(sa_distance(ctx, a, b), ctx.psi_sa));
}

/// Per-slot quantities of one graph that do not depend on the iteration.
struct EdgeCache {
  const DataGraph* g = nullptr;
  std::vector<double> cos;
  std::vector<double> excess;
  std::vector<double> gap;
  std::vector<std::size_t> common_offsets{0};
  std::vector<Node> common;

  EdgeCache(const DataGraph& graph, const WalkContext& ctx) : g(&graph) {
    const std::size_t slots = graph.offsets().back();
    cos.resize(slots);
    excess.resize(slots);
    gap.resize(slots);
    for (Node p = 0; p < graph.size(); ++p) {
      auto nb = graph.neighbors(p);
      for (std::size_t s = 0; s < nb.size(); ++s) {
        const std::size_t slot = graph.offsets()[p] + s;
        const Node q = nb[s];
        auto shared = common_neighbors(graph, p, q);
        common.insert(common.end(), shared.begin(), shared.end());
        common_offsets.push_back(common.size());
        cos[slot] = cosine_similarity(ctx, graph.node_id(p), graph.node_id(q));
        excess[slot] = similarity_excess(graph, p, q, ctx);
        gap[slot] = psi_gap(graph, p, q, ctx);
      }
    }
  }

  std::span<const Node> shared(std::size_t slot) const {
    return {common.data() + common_offsets[slot], common_offsets[slot + 1] - common_offsets[slot]};
  }

  double excess_of(Node p, Node r) const { return excess[g->offsets()[p] + std::size_t(g->slot(p, r))]; }

  /// sum over shared neighbors r of S(p,r) S(q,r)
  double cross_term(Node p, Node q, std::size_t slot) const {
    double s = 0.0;
    for (Node r : shared(slot)) s += excess_of(p, r) * excess_of(q, r);
    return s;
  }
};

double tendency_factor(std::span<const Node> shared, const DataGraph& g, Node q, std::span<const double> i_cum,
                       WalkMode mode) {
  if (shared.empty()) return mode == WalkMode::Dense ? 0.0 : 1.0;
  double denom = 0.0;
  for (Node t : shared) denom += i_cum[g.node_id(t)];
  if (denom <= 0.0) return 1.0 / double(shared.size());
  return i_cum[g.node_id(q)] / denom;
}

std::vector<double> dense_weights(const EdgeCache& c) {
  const DataGraph& g = *c.g;
  std::vector<double> w(c.cos.size());
  for (Node p = 0; p < g.size(); ++p) {
    auto nb = g.neighbors(p);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      const std::size_t slot = g.offsets()[p] + s;
      w[slot] = c.cos[slot] + degree_factor(g, nb[s]) * c.cross_term(p, nb[s], slot);
    }
  }
  return w;
}

std::vector<double> sparse_weights(const EdgeCache& c) {
  const DataGraph& g = *c.g;
  std::vector<double> w(c.cos.size());
  for (Node p = 0; p < g.size(); ++p) {
    auto nb = g.neighbors(p);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      const std::size_t slot = g.offsets()[p] + s;
      w[slot] = c.gap[slot] * degree_factor(g, nb[s]);
    }
  }
  return w;
}

double tendency_slot_weight(const EdgeCache& c, Node p, Node q, std::size_t slot, std::span<const double> i_cum,
                            WalkMode mode) {
  const double factor = tendency_factor(c.shared(slot), *c.g, q, i_cum, mode);
  if (mode == WalkMode::Dense) return c.cos[slot] + factor * c.cross_term(p, q, slot);
  return factor * c.gap[slot];
}

std::vector<double> tendency_weights(const EdgeCache& c, std::span<const double> i_cum, WalkMode mode) {
  const DataGraph& g = *c.g;
  std::vector<double> w(c.cos.size());
  for (Node p = 0; p < g.size(); ++p) {
    auto nb = g.neighbors(p);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      const std::size_t slot = g.offsets()[p] + s;
      w[slot] = tendency_slot_weight(c, p, nb[s], slot, i_cum, mode);
    }
  }
  return w;
}

std::vector<double> mixed_tendency_weights(const EdgeCache& c, const WalkContext& ctx,
                                           std::span<const double> i_cum) {
  const DataGraph& g = *c.g;
  std::vector<double> w(c.cos.size());
  for (Node p = 0; p < g.size(); ++p) {
    const WalkMode mode = ctx.is_dense[g.node_id(p)] ? WalkMode::Dense : WalkMode::Sparse;
    auto nb = g.neighbors(p);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      const std::size_t slot = g.offsets()[p] + s;
      w[slot] = tendency_slot_weight(c, p, nb[s], slot, i_cum, mode);
    }
  }
  return w;
}

template <typename Fn>
std::vector<std::uint64_t> accumulate_over_origins(std::size_t n_nodes, std::size_t n_origins, Fn&& per_origin) {
  // Integer visit counts; the merge is order-independent, so chunking cannot
  // change the result.
  const std::size_t workers = std::max<std::size_t>(1, std::min(worker_count(), n_origins));
  std::vector<std::vector<std::uint64_t>> partial(workers, std::vector<std::uint64_t>(n_nodes, 0));
  parallel_for(n_origins, [&](std::size_t begin, std::size_t end) {
    // Chunk t starts at n * t / workers (see parallel_for); starts are distinct
    // because workers <= n_origins.
    std::size_t chunk = 0;
    while (chunk + 1 < workers && n_origins * (chunk + 1) / workers <= begin) ++chunk;
    auto& local = partial[chunk];
    for (std::size_t o = begin; o < end; ++o) per_origin(o, local);
  });
  std::vector<std::uint64_t> total(n_nodes, 0);
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < n_nodes; ++i) total[i] += p[i];
  }
  return total;
}

std::vector<Node> to_nodes(const std::vector<std::size_t>& idx) { return {idx.begin(), idx.end()}; }

}  // namespace

// ---------------------------------------------------------------------------
// Context

WalkContext make_walk_context(const DataGraph& g, const GraphPartition& part, const FeatureMatrix& f_ae,
                              const FeatureMatrix& f_sa, double sigma_den, std::uint64_t seed) {
  if (f_ae.rows() != g.size() || f_sa.rows() != g.size()) {
    throw ShapeError("feature matrices have " + std::to_string(f_ae.rows()) + " and " + std::to_string(f_sa.rows()) +
                     " rows for a graph of " + std::to_string(g.size()) + " nodes");
  }
  if (part.is_dense.size() != g.size()) throw ShapeError("partition does not match the graph");
  WalkContext ctx;
  ctx.graph = &g;
  ctx.f_ae = &f_ae;
  ctx.f_sa = &f_sa;
  ctx.is_dense = part.is_dense;
  ctx.rng_seed = seed;
  ctx.budget = double(g.k_nn());
  ctx.sa_norm.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (float v : f_sa.row(i)) s += double(v) * double(v);
    ctx.sa_norm[i] = std::sqrt(s);
  }
  if (sigma_den <= 0.0) sigma_den = graph::median_edge_distance(g, f_sa);
  ctx.density = graph::graph_density(g, f_sa, sigma_den);

  const auto edges = g.edges();
  if (!edges.empty()) {
    ctx.psi_ae = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    ctx.psi_sa = ctx.psi_ae;
    for (auto [p, q] : edges) {
      const double a = ae_distance(ctx, p, q);
      const double s = sa_distance(ctx, p, q);
      ctx.psi_ae = {std::min(ctx.psi_ae.lo, a), std::max(ctx.psi_ae.hi, a)};
      ctx.psi_sa = {std::min(ctx.psi_sa.lo, s), std::max(ctx.psi_sa.hi, s)};
    }
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Edge quantities

double minmax_scale(double x, const ScaleBounds& bounds) {
  if (!(bounds.hi > bounds.lo)) return 0.0;
  return std::clamp((x - bounds.lo) / (bounds.hi - bounds.lo), 0.0, 1.0);
}

double cosine_similarity(const WalkContext& ctx, Node a, Node b) {
  const double na = ctx.sa_norm[a];
  const double nb = ctx.sa_norm[b];
  if (na == 0.0 || nb == 0.0) {
    throw DataError("zero-norm SA feature on row " + std::to_string(na == 0.0 ? a : b));
  }
  auto ra = ctx.f_sa->row(a);
  auto rb = ctx.f_sa->row(b);
  double dot = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) dot += double(ra[i]) * double(rb[i]);
  return dot / (na * nb);
}

std::vector<Node> common_neighbors(const DataGraph& g, Node p, Node q) {
  auto a = g.neighbors(p);
  auto b = g.neighbors(q);
  std::vector<Node> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

double similarity_excess(const DataGraph& g, Node p, Node q, const WalkContext& ctx) {
  const double direct = cosine_similarity(ctx, g.node_id(p), g.node_id(q));
  const auto shared = common_neighbors(g, p, q);
  if (shared.size() < 2) return direct;
  double sum = 0.0;
  for (std::size_t i = 0; i < shared.size(); ++i) {
    for (std::size_t j = i + 1; j < shared.size(); ++j) {
      sum += cosine_similarity(ctx, g.node_id(shared[i]), g.node_id(shared[j]));
    }
  }
  const double pairs = double(shared.size()) * double(shared.size() - 1) / 2.0;
  return direct - sum / pairs;
}

double visit_weight_dense(const DataGraph& g, Node p, Node q, const WalkContext& ctx) {
  double cross = 0.0;
  for (Node r : common_neighbors(g, p, q)) cross += similarity_excess(g, p, r, ctx) * similarity_excess(g, q, r, ctx);
  return cosine_similarity(ctx, g.node_id(p), g.node_id(q)) + degree_factor(g, q) * cross;
}

double visit_weight_sparse(const DataGraph& g, Node p, Node q, const WalkContext& ctx) {
  return psi_gap(g, p, q, ctx) * degree_factor(g, q);
}

double tendency_weight(const DataGraph& g, Node p, Node q, const WalkContext& ctx, std::span<const double> i_cum,
                       WalkMode mode) {
  const auto shared = common_neighbors(g, p, q);
  const double factor = tendency_factor(shared, g, q, i_cum, mode);
  if (mode == WalkMode::Sparse) return factor * psi_gap(g, p, q, ctx);
  double cross = 0.0;
  for (Node t : shared) cross += similarity_excess(g, p, t, ctx) * similarity_excess(g, q, t, ctx);
  return cosine_similarity(ctx, g.node_id(p), g.node_id(q)) + factor * cross;
}

// ---------------------------------------------------------------------------
// Transitions

std::vector<double> transition_probabilities(std::span<const double> weights) {
  std::vector<double> p(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    p[i] = weights[i] > 0.0 ? weights[i] : 0.0;
    total += p[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(p.begin(), p.end(), weights.empty() ? 0.0 : 1.0 / double(weights.size()));
    return p;
  }
  for (double& v : p) v /= total;
  return p;
}

TransitionTable::TransitionTable(const DataGraph& g, std::span<const double> slot_weights) : graph_(&g) {
  if (slot_weights.size() != g.offsets().back()) throw ShapeError("transition weights do not match edge slots");
  prob_.resize(slot_weights.size());
  cumulative_.resize(slot_weights.size());
  for (Node p = 0; p < g.size(); ++p) {
    const std::size_t begin = g.offsets()[p];
    const std::size_t end = g.offsets()[p + 1];
    auto probs = transition_probabilities(slot_weights.subspan(begin, end - begin));
    double acc = 0.0;
    for (std::size_t s = 0; s < probs.size(); ++s) {
      prob_[begin + s] = probs[s];
      acc += probs[s];
      cumulative_[begin + s] = acc;
    }
  }
}

std::span<const double> TransitionTable::probabilities(Node p) const {
  const std::size_t begin = graph_->offsets()[p];
  return {prob_.data() + begin, graph_->offsets()[p + 1] - begin};
}

Node rw_step(const TransitionTable& table, Node p, CounterRng& rng) {
  const DataGraph& g = *table.graph_;
  auto nb = g.neighbors(p);
  if (nb.empty()) throw WalkError("node " + std::to_string(g.node_id(p)) + " has no neighbors to walk to");
  const std::size_t begin = g.offsets()[p];
  const double u = rng.uniform();
  for (std::size_t s = 0; s + 1 < nb.size(); ++s) {
    if (u < table.cumulative_[begin + s]) return nb[s];
  }
  return nb.back();
}

TransitionTable dense_table(const DataGraph& g, const WalkContext& ctx) {
  return TransitionTable(g, dense_weights(EdgeCache(g, ctx)));
}

TransitionTable sparse_table(const DataGraph& g, const WalkContext& ctx) {
  return TransitionTable(g, sparse_weights(EdgeCache(g, ctx)));
}

TransitionTable tendency_table(const DataGraph& g, const WalkContext& ctx, std::span<const double> i_cum,
                               WalkMode mode) {
  return TransitionTable(g, tendency_weights(EdgeCache(g, ctx), i_cum, mode));
}

TransitionTable mixed_tendency_table(const WalkContext& ctx, std::span<const double> i_cum) {
  return TransitionTable(*ctx.graph, mixed_tendency_weights(EdgeCache(*ctx.graph, ctx), ctx, i_cum));
}

std::vector<std::uint64_t> walk_visits(const TransitionTable& table, std::span<const Node> origins,
                                       std::size_t epochs, std::size_t steps, std::uint64_t seed,
                                       std::uint64_t phase, std::uint64_t subgraph) {
  const DataGraph& g = table.graph();
  return accumulate_over_origins(g.size(), origins.size(), [&](std::size_t o, std::vector<std::uint64_t>& visits) {
    const Node origin = origins[o];
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      CounterRng rng{seed, phase, subgraph, g.node_id(origin), epoch};
      Node cur = origin;
      ++visits[cur];
      if (g.degree(cur) == 0) continue;
      for (std::size_t step = 0; step < steps; ++step) {
        cur = rw_step(table, cur, rng);
        ++visits[cur];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Budget walks

double step_cost(double ae_dist, double dhat_origin, double dhat_dest) {
  const double origin = std::max(dhat_origin, graph::kDensityFloor);
  const double dest = std::max(dhat_dest, graph::kDensityFloor);
  return std::max(ae_dist * dest / origin, kCostFloor);
}

double step_cost(Node p, Node q, const WalkContext& ctx) {
  const DataGraph& g = *ctx.graph;
  // The origin's own relative density has no self-loop term.
  const double dhat_origin = graph::relative_density(g, ctx.density, p, p);
  const double dhat_dest = graph::relative_density(g, ctx.density, p, q);
  return step_cost(ae_distance(ctx, p, q), dhat_origin, dhat_dest);
}

std::vector<double> step_cost_table(const WalkContext& ctx) {
  const DataGraph& g = *ctx.graph;
  std::vector<double> cost(g.offsets().back());
  for (Node p = 0; p < g.size(); ++p) {
    auto nb = g.neighbors(p);
    for (std::size_t s = 0; s < nb.size(); ++s) cost[g.offsets()[p] + s] = step_cost(p, nb[s], ctx);
  }
  return cost;
}

std::vector<std::uint64_t> budget_walk_visits(const TransitionTable& table, std::span<const double> slot_cost,
                                              std::span<const Node> origins, std::size_t epochs, double budget,
                                              std::size_t step_cap, std::uint64_t seed, std::uint64_t phase,
                                              BudgetWalkStats* stats) {
  const DataGraph& g = table.graph();
  if (slot_cost.size() != g.offsets().back()) throw ShapeError("step costs do not match edge slots");
  std::vector<BudgetWalkStats> per_origin(origins.size());
  auto visits = accumulate_over_origins(g.size(), origins.size(), [&](std::size_t o, std::vector<std::uint64_t>& v) {
    const Node origin = origins[o];
    BudgetWalkStats& st = per_origin[o];
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      CounterRng rng{seed, phase, 0xb0d9e7, g.node_id(origin), epoch};
      Node cur = origin;
      ++v[cur];
      ++st.walks;
      double remaining = budget;
      std::size_t steps = 0;
      while (remaining >= 0.0 && g.degree(cur) > 0) {
        if (steps >= step_cap) {
          ++st.capped;
          break;
        }
        const Node next = rw_step(table, cur, rng);
        remaining -= slot_cost[g.offsets()[cur] + std::size_t(g.slot(cur, next))];
        cur = next;
        ++v[cur];
        ++steps;
      }
      st.steps += steps;
    }
  });
  if (stats) {
    for (const auto& st : per_origin) {
      stats->walks += st.walks;
      stats->capped += st.capped;
      stats->steps += st.steps;
    }
  }
  return visits;
}

std::vector<double> informativeness_score(const WalkContext& ctx, std::span<const Node> selected,
                                          std::size_t m_epochs, std::span<const double> i_cum_prev,
                                          std::uint64_t iteration, BudgetWalkStats* stats) {
  const DataGraph& g = *ctx.graph;
  if (i_cum_prev.size() != g.size()) throw ShapeError("cumulative I-score length does not match the graph");
  const TransitionTable table = mixed_tendency_table(ctx, i_cum_prev);
  const auto cost = step_cost_table(ctx);
  BudgetWalkStats local;
  const auto visits = budget_walk_visits(table, cost, selected, m_epochs, ctx.budget, ctx.max_walk_steps,
                                         ctx.rng_seed, 0x15c0 + iteration, &local);
  if (local.capped > 0) {
    std::cerr << "warning: " << local.capped << " of " << local.walks
              << " informativeness walks hit the step cap of " << ctx.max_walk_steps << "\n";
  }
  if (stats) *stats = local;
  return {visits.begin(), visits.end()};
}

double stop_criterion(std::span<const double> now, std::span<const double> prev, double rho) {
  if (now.size() != prev.size()) throw ShapeError("stop_criterion: vectors differ in length");
  if (!(rho > 0.0 && rho <= 1.0)) throw ParamError("rho must lie in (0, 1]");
  auto max_of = [](std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
  };
  const double max_now = max_of(now);
  const double max_prev = max_of(prev);
  double loss = 0.0;
  for (std::size_t k = 0; k < now.size(); ++k) {
    const double a = max_now > 0.0 ? now[k] / max_now : 0.0;
    const double b = max_prev > 0.0 ? prev[k] / max_prev : 0.0;
    loss -= std::abs(a - b) * std::log2(b + rho);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Drivers

std::pair<std::size_t, std::size_t> split_quota(std::size_t total, std::size_t dense, std::size_t sparse) {
  const std::size_t n = dense + sparse;
  total = std::min(total, n);
  if (total == 0) return {0, 0};
  std::size_t qd = 0;
  if (dense > 0) {
    qd = std::max<std::size_t>(1, std::size_t(std::llround(double(total) * double(dense) / double(n))));
    qd = std::min({qd, dense, total});
  }
  std::size_t qs = std::min(total - qd, sparse);
  if (qd + qs < total) qd = total - qs;
  return {qd, qs};
}

namespace {

struct SubgraphPlan {
  const DataGraph* g;
  WalkMode mode;
  std::size_t quota;
  std::uint64_t id;
};

/// Top-scoring nodes, with the count shared among connected components in
/// proportion to their size (largest remainder). Walks never leave their
/// component, so seeds concentrated in one would leave the others unvisited.
std::vector<Node> centrality_seeds(const DataGraph& g, WalkMode mode, std::size_t count) {
  const std::vector<double> score =
      mode == WalkMode::Dense ? graph::eigen_centrality(g).score : graph::closeness_centrality(g);
  const auto comp = graph::connected_components(g);
  const std::size_t n = g.size();
  count = std::min(count, n);
  const std::size_t n_comp = n == 0 ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<std::vector<std::size_t>> members(n_comp);
  for (std::size_t p = 0; p < n; ++p) members[comp[p]].push_back(p);

  std::vector<std::size_t> quota(n_comp);
  std::vector<std::size_t> remainder(n_comp);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < n_comp; ++c) {
    quota[c] = count * members[c].size() / n;
    remainder[c] = count * members[c].size() % n;
    assigned += quota[c];
  }
  for (std::size_t c : top_indices<std::size_t>(remainder, count - assigned)) ++quota[c];

  std::vector<std::size_t> seeds;
  for (std::size_t c = 0; c < n_comp; ++c) {
    std::vector<double> local(members[c].size());
    for (std::size_t i = 0; i < local.size(); ++i) local[i] = score[members[c][i]];
    for (std::size_t i : top_indices<double>(local, quota[c])) seeds.push_back(members[c][i]);
  }
  std::sort(seeds.begin(), seeds.end(), [&](std::size_t a, std::size_t b) {
    return score[a] > score[b] || (score[a] == score[b] && a < b);
  });
  return to_nodes(seeds);
}

void append_picks(SampleSet& out, const DataGraph& g, const std::vector<std::uint64_t>& visits,
                  const std::vector<std::size_t>& picks, std::size_t iteration) {
  for (std::size_t p : picks) {
    out.selected.push_back(g.node_id(Node(p)));
    out.pick_visits.push_back(visits[p]);
    out.iteration.push_back(iteration);
  }
}

}  // namespace

SampleSet one_time_sampling(const GraphPartition& part, std::size_t n_s, std::size_t m_epochs,
                            const WalkContext& ctx) {
  if (n_s == 0) throw ParamError("n_s must be at least 1");
  if (m_epochs == 0) throw ParamError("m_epochs must be at least 1");
  const std::size_t n = part.dense.size() + part.sparse.size();
  const std::size_t target = std::min(n_s, n);
  const auto [qd, qs] = split_quota(target, part.dense.size(), part.sparse.size());

  SampleSet out;
  out.visits.assign(n, 0);
  const SubgraphPlan plans[] = {{&part.dense, WalkMode::Dense, qd, 0}, {&part.sparse, WalkMode::Sparse, qs, 1}};
  for (const auto& plan : plans) {
    if (plan.quota == 0) continue;
    const DataGraph& g = *plan.g;
    const TransitionTable table = plan.mode == WalkMode::Dense ? dense_table(g, ctx) : sparse_table(g, ctx);
    const auto seeds = centrality_seeds(g, plan.mode, plan.quota);
    const auto visits = walk_visits(table, seeds, m_epochs, target, ctx.rng_seed, 0, plan.id);
    for (Node p = 0; p < g.size(); ++p) out.visits[g.node_id(p)] += visits[p];
    append_picks(out, g, visits, top_indices<std::uint64_t>(visits, plan.quota), 0);
  }
  return out;
}

IncrementalResult incremental_sampling(const GraphPartition& part, std::size_t n_s_per_batch, std::size_t m_epochs,
                                       const WalkContext& ctx, std::size_t max_batches) {
  if (n_s_per_batch == 0) throw ParamError("batch size must be at least 1");
  const std::size_t n = part.dense.size() + part.sparse.size();
  IncrementalResult res;
  res.samples = one_time_sampling(part, n_s_per_batch, m_epochs, ctx);
  res.batches = 1;
  std::vector<bool> chosen(n, false);
  for (Node s : res.samples.selected) chosen[s] = true;
  std::vector<bool> last_batch = chosen;

  // Edge caches do not change between batches.
  const EdgeCache dense_cache(part.dense, ctx);
  const EdgeCache sparse_cache(part.sparse, ctx);

  std::vector<double> i_prev(n, 0.0);
  res.scores.i_cumulative = i_prev;
  for (std::uint64_t iter = 1;; ++iter) {
    if (res.samples.size() == n) {
      res.reason = StopReason::AllSelected;
      break;
    }
    if (max_batches > 0 && res.batches >= max_batches) {
      res.reason = StopReason::BatchLimit;
      break;
    }
    res.scores.i = informativeness_score(ctx, res.samples.selected, m_epochs, i_prev, iter);
    std::vector<double> i_now(n);
    for (std::size_t k = 0; k < n; ++k) i_now[k] = i_prev[k] + res.scores.i[k];
    res.scores.i_cumulative = i_now;
    const double rho = double(res.samples.size()) / double(n);
    const double loss = stop_criterion(i_now, i_prev, rho);
    res.loss_history.push_back(loss);
    if (loss <= 0.0) {
      res.reason = StopReason::Criterion;
      break;
    }

    auto unselected = [&](const DataGraph& g) {
      std::size_t c = 0;
      for (Node p = 0; p < g.size(); ++p) c += chosen[g.node_id(p)] ? 0 : 1;
      return c;
    };
    const auto [qd, qs] = split_quota(n_s_per_batch, unselected(part.dense), unselected(part.sparse));
    const std::pair<const EdgeCache*, SubgraphPlan> plans[] = {
        {&dense_cache, {&part.dense, WalkMode::Dense, qd, 0}},
        {&sparse_cache, {&part.sparse, WalkMode::Sparse, qs, 1}}};
    std::vector<Node> batch;
    for (const auto& [cache, plan] : plans) {
      if (plan.quota == 0) continue;
      const DataGraph& g = *plan.g;
      const TransitionTable table(g, tendency_weights(*cache, i_now, plan.mode));
      std::vector<Node> origins;
      for (Node p = 0; p < g.size(); ++p) {
        if (last_batch[g.node_id(p)]) origins.push_back(p);
      }
      if (origins.empty()) origins = centrality_seeds(g, plan.mode, plan.quota);
      auto visits = walk_visits(table, origins, m_epochs, n_s_per_batch, ctx.rng_seed, iter, plan.id);
      for (Node p = 0; p < g.size(); ++p) res.samples.visits[g.node_id(p)] += visits[p];

      std::vector<std::size_t> candidates;
      std::vector<std::uint64_t> candidate_visits;
      for (Node p = 0; p < g.size(); ++p) {
        if (!chosen[g.node_id(p)]) {
          candidates.push_back(p);
          candidate_visits.push_back(visits[p]);
        }
      }
      for (std::size_t c : top_indices<std::uint64_t>(candidate_visits, plan.quota)) {
        const Node p = Node(candidates[c]);
        res.samples.selected.push_back(g.node_id(p));
        res.samples.pick_visits.push_back(visits[p]);
        res.samples.iteration.push_back(iter);
        batch.push_back(g.node_id(p));
      }
    }
    last_batch.assign(n, false);
    for (Node b : batch) chosen[b] = last_batch[b] = true;
    ++res.batches;
    i_prev = std::move(i_now);
  }
  return res;
}

}  // namespace glocal::sampling
