#include "glocal/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "glocal/error.hpp"
#include "glocal/rng.hpp"

namespace glocal::scoring {

namespace {

Eigen::MatrixXd to_eigen(const FeatureMatrix& m) {
  Eigen::MatrixXd out(Eigen::Index(m.rows()), Eigen::Index(m.dim()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.dim(); ++j) out(Eigen::Index(i), Eigen::Index(j)) = m(i, j);
  }
  return out;
}

std::span<const double> row_span(const Eigen::MatrixXd& m, Eigen::Index i, std::vector<double>& buf) {
  buf.resize(std::size_t(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) buf[std::size_t(j)] = m(i, j);
  return buf;
}

double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

// ---------------------------------------------------------------------------
// k-means

double kmeans_objective(const FeatureMatrix& z, const Eigen::MatrixXd& centers,
                        std::span<const std::size_t> assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < z.dim(); ++j) {
      const double diff = double(row[j]) - centers(Eigen::Index(assignment[i]), Eigen::Index(j));
      total += diff * diff;
    }
  }
  return total;
}

ClusterModel kmeans(const FeatureMatrix& z, std::size_t k, std::uint64_t seed, std::size_t max_iterations) {
  const std::size_t n = z.rows();
  if (k == 0 || k > n) {
    throw ParamError("k-means needs 1 <= K <= n (K=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  const Eigen::MatrixXd x = to_eigen(z);
  CounterRng rng{seed, 0x6b6d};

  // k-means++ seeding.
  Eigen::MatrixXd centers(Eigen::Index(k), x.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t first = std::size_t(rng.below(n));
  centers.row(0) = x.row(Eigen::Index(first));
  chosen[first] = true;
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x, Eigen::Index(i), centers, Eigen::Index(c - 1)));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a center; take the first unused one.
      pick = std::size_t(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    chosen[pick] = true;
    centers.row(Eigen::Index(c)) = x.row(Eigen::Index(pick));
  }

  ClusterModel model;
  model.assignment.assign(n, k);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(x, Eigen::Index(i), centers, Eigen::Index(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (model.assignment[i] != best) {
        model.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(Eigen::Index(k), x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(Eigen::Index(model.assignment[i])) += x.row(Eigen::Index(i));
      ++counts[model.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) centers.row(Eigen::Index(c)) = sums.row(Eigen::Index(c)) / double(counts[c]);
    }
    model.objective_trace.push_back(kmeans_objective(z, centers, model.assignment));
    model.iterations = it + 1;
  }
  model.centers = std::move(centers);
  return model;
}

// ---------------------------------------------------------------------------
// SVDD

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
  if (type == KernelType::Linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::exp(-s / (2.0 * sigma * sigma));
}

double median_heuristic_sigma(const Eigen::MatrixXd& points) {
  std::vector<double> dists;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) dists.push_back((points.row(i) - points.row(j)).norm());
  }
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + std::ptrdiff_t(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double median = *mid;
  if (dists.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dists.begin(), mid));
  }
  return median > 0.0 ? median : 1.0;
}

double Hypersphere::distance2(std::span<const double> z) const {
  std::vector<double> buf;
  double cross = 0.0;
  for (Eigen::Index i = 0; i < support.rows(); ++i) cross += alpha[i] * kernel(z, row_span(support, i, buf));
  return kernel(z, z) - 2.0 * cross + center_norm2;
}

double radius2_from_dual(const Eigen::VectorXd& alpha, const Eigen::VectorXd& distance2, double box) {
  const double eps = 1e-9 * box;
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha[i] <= eps) {
      lo = std::max(lo, distance2[i]);
    } else if (alpha[i] >= box - eps) {
      hi = std::min(hi, distance2[i]);
    } else {
      free_sum += distance2[i];
      ++free_count;
    }
  }
  if (free_count > 0) return std::max(0.0, free_sum / double(free_count));
  if (!std::isfinite(hi)) return lo;
  return 0.5 * (lo + std::max(lo, hi));
}

SvddSolution fit_svdd(const Eigen::MatrixXd& points, double nu, const Kernel& kernel, const SvddOptions& options) {
  const Eigen::Index m = points.rows();
  if (m < 1) throw EmptyError("fit_svdd needs at least one point");
  if (!(nu > 0.0 && nu <= 1.0)) throw ParamError("nu must lie in (0, 1], got " + std::to_string(nu));

  std::vector<double> ba;
  std::vector<double> bb;
  Eigen::MatrixXd gram(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const double v = kernel(row_span(points, i, ba), row_span(points, j, bb));
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  const double box = 1.0 / (nu * double(m));

  // Feasible start: fill coefficients up to the box in index order.
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  double remaining = 1.0;
  for (Eigen::Index i = 0; i < m && remaining > 0.0; ++i) {
    alpha[i] = std::min(box, remaining);
    remaining -= alpha[i];
  }
  // Minimize f(a) = a^T K a - a^T diag(K); gradient 2 K a - diag(K).
  Eigen::VectorXd grad = 2.0 * gram * alpha - gram.diagonal();

  std::size_t iter = 0;
  double gap = 0.0;
  const double eps = 1e-12 * box;
  for (;; ++iter) {
    Eigen::Index up = -1;
    Eigen::Index low = -1;
    for (Eigen::Index t = 0; t < m; ++t) {
      if (alpha[t] < box - eps && (up < 0 || grad[t] < grad[up])) up = t;
      if (alpha[t] > eps && (low < 0 || grad[t] > grad[low])) low = t;
    }
    gap = (up < 0 || low < 0) ? 0.0 : grad[low] - grad[up];
    if (gap < options.tolerance) break;
    if (iter >= options.max_iterations) throw SolverError("SVDD did not reach the KKT tolerance", gap);

    const double curvature = gram(up, up) + gram(low, low) - 2.0 * gram(up, low);
    const double limit = std::min(box - alpha[up], alpha[low]);
    double step = curvature > 1e-12 ? gap / (2.0 * curvature) : limit;
    step = std::min(step, limit);
    alpha[up] += step;
    alpha[low] -= step;
    if (box - alpha[up] <= eps) alpha[up] = box;
    if (alpha[low] <= eps) alpha[low] = 0.0;
    grad += 2.0 * step * (gram.col(up) - gram.col(low));
  }

  SvddSolution sol;
  const double center_norm2 = alpha.dot(gram * alpha);
  sol.distance2 = gram.diagonal() - 2.0 * gram * alpha + Eigen::VectorXd::Constant(m, center_norm2);
  sol.alpha = alpha;

  Hypersphere& s = sol.sphere;
  s.kernel = kernel;
  s.center_norm2 = center_norm2;
  s.radius2 = radius2_from_dual(alpha, sol.distance2, box);
  s.objective = alpha.dot(gram.diagonal()) - center_norm2;
  s.iterations = iter;
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (alpha[i] > 0.0) support.push_back(i);
  }
  s.support.resize(Eigen::Index(support.size()), points.cols());
  s.alpha.resize(Eigen::Index(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    s.support.row(Eigen::Index(i)) = points.row(support[i]);
    s.alpha[Eigen::Index(i)] = alpha[support[i]];
  }
  return sol;
}

Hypersphere fit_svdd(const FeatureMatrix& points, double nu, const Kernel& kernel, const SvddOptions& options) {
  return fit_svdd(to_eigen(points), nu, kernel, options).sphere;
}

HypersphereModel fit_mcsvm(const FeatureMatrix& z, std::size_t k, double nu, const KernelChoice& kernel,
                           std::uint64_t seed, const SvddOptions& options) {
  HypersphereModel model;
  model.nu = nu;
  model.clusters = kmeans(z, k, seed);
  const Eigen::MatrixXd x = to_eigen(z);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      if (model.clusters.assignment[i] == c) members.push_back(Eigen::Index(i));
    }
    if (members.empty()) continue;
    Eigen::MatrixXd pts(Eigen::Index(members.size()), x.cols());
    for (std::size_t i = 0; i < members.size(); ++i) pts.row(Eigen::Index(i)) = x.row(members[i]);
    Kernel kern{kernel.type, 1.0};
    if (kernel.type == KernelType::Rbf) kern.sigma = kernel.sigma > 0.0 ? kernel.sigma : median_heuristic_sigma(pts);
    model.spheres.push_back(fit_svdd(pts, nu, kern, options).sphere);
  }
  return model;
}

double local_score(std::span<const double> z, const HypersphereModel& model) {
  if (model.spheres.empty()) throw ParamError("hypersphere model has no spheres");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : model.spheres) best = std::min(best, s.distance2(z) - s.radius2);
  return best;
}

std::vector<double> local_scores(const FeatureMatrix& z, const HypersphereModel& model) {
  std::vector<double> out(z.rows());
  std::vector<double> buf(z.dim());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    std::copy(row.begin(), row.end(), buf.begin());
    out[i] = local_score(buf, model);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fusion and evaluation

ScoreVector normalize_scores(const ScoreVector& v) {
  const std::size_t n = v.values.size();
  if (n < 2) throw DegenerateError("normalization needs at least two scores");
  double mean = 0.0;
  for (double x : v.values) mean += x;
  mean /= double(n);
  // Corrected two-pass: the rounding error of `mean` is recovered from the
  // centered residuals, which keeps the output mean near zero even when the
  // spread is tiny next to the offset.
  std::vector<double> centered(n);
  double drift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centered[i] = v.values[i] - mean;
    drift += centered[i];
  }
  drift /= double(n);
  double ss = 0.0;
  for (double& c : centered) {
    c -= drift;
    ss += c * c;
  }
  const double sd = std::sqrt(ss / double(n));
  if (!(sd > 0.0)) throw DegenerateError("cannot normalize a constant score vector");
  ScoreVector out{std::move(centered), ScoreKind::Normalized};
  for (double& x : out.values) x /= sd;
  return out;
}

ScoreVector glocal_score(const ScoreVector& local, const ScoreVector& global) {
  if (local.values.size() != global.values.size()) {
    throw ShapeError("local and global score vectors differ in length (" + std::to_string(local.values.size()) +
                     " vs " + std::to_string(global.values.size()) + ")");
  }
  const ScoreVector a = normalize_scores(local);
  const ScoreVector b = normalize_scores(global);
  ScoreVector out{std::vector<double>(a.values.size()), ScoreKind::Glocal};
  for (std::size_t i = 0; i < a.values.size(); ++i) out.values[i] = a.values[i] + b.values[i];
  return out;
}

std::vector<bool> decide_novel(const ScoreVector& glocal, double threshold) {
  std::vector<bool> out(glocal.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = glocal.values[i] >= threshold;
  return out;
}

double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  const std::size_t n = scores.size();
  if (labels.size() != n) throw ShapeError("auc: scores and labels differ in length");
  const std::size_t n_pos = std::size_t(std::count(labels.begin(), labels.end(), true));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DegenerateError("auc needs both positive and negative labels");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks, 1-based; tied blocks share the average rank.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * double(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) pos_rank_sum += rank;
    }
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * double(n_pos) * double(n_pos + 1);
  return u / (double(n_pos) * double(n_neg));
}

}  // namespace glocal::scoring
