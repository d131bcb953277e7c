#pragma once

// Local (clustered SVDD), global, and fused novelty scores plus ROC/AUC.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "glocal/io.hpp"

namespace glocal::scoring {

// ---------------------------------------------------------------------------
// k-means

struct ClusterModel {
  Eigen::MatrixXd centers;              // K x D
  std::vector<std::size_t> assignment;  // per sample
  std::vector<double> objective_trace;  // sum of squared distances after each Lloyd step
  std::size_t iterations = 0;

  std::size_t k() const { return std::size_t(centers.rows()); }
  double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

inline constexpr std::size_t kKMeansMaxIterations = 300;

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing. Empty clusters keep their previous center.
ClusterModel kmeans(const FeatureMatrix& z, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = kKMeansMaxIterations);

double kmeans_objective(const FeatureMatrix& z, const Eigen::MatrixXd& centers,
                        std::span<const std::size_t> assignment);

// ---------------------------------------------------------------------------
// SVDD hyperspheres

enum class KernelType { Linear, Rbf };

struct Kernel {
  KernelType type = KernelType::Rbf;
  double sigma = 1.0;  // RBF bandwidth: exp(-||a-b||^2 / (2 sigma^2))

  double operator()(std::span<const double> a, std::span<const double> b) const;
};

/// Median pairwise Euclidean distance; 1 when it is zero or undefined.
double median_heuristic_sigma(const Eigen::MatrixXd& points);

struct SvddOptions {
  double tolerance = 1e-6;
  std::size_t max_iterations = 10'000'000;
};

/// One soft-boundary sphere. The center lives in kernel feature space and is
/// stored as coefficients over its support vectors.
struct Hypersphere {
  Kernel kernel;
  Eigen::MatrixXd support;  // rows = support vectors
  Eigen::VectorXd alpha;    // coefficient per support vector, sums to 1
  double center_norm2 = 0.0;  // alpha^T K alpha
  double radius2 = 0.0;
  double objective = 0.0;  // optimal dual value (equals the primal optimum)
  std::size_t iterations = 0;

  /// ||phi(z) - c||^2
  double distance2(std::span<const double> z) const;
};

/// Dual coefficients for all m points (index order preserved) and the sphere.
struct SvddSolution {
  Eigen::VectorXd alpha;
  Eigen::VectorXd distance2;  // per training point
  Hypersphere sphere;
};

/// Solves min R^2 + 1/(nu m) sum xi through its dual with pairwise
/// coordinate updates (maximal violating pair) until the KKT gap < tolerance.
SvddSolution fit_svdd(const Eigen::MatrixXd& points, double nu, const Kernel& kernel, const SvddOptions& options = {});
Hypersphere fit_svdd(const FeatureMatrix& points, double nu, const Kernel& kernel, const SvddOptions& options = {});

/// R^2 from a dual solution: mean distance over free support vectors, or the
/// midpoint of the KKT-feasible interval when every coefficient sits at a bound.
double radius2_from_dual(const Eigen::VectorXd& alpha, const Eigen::VectorXd& distance2, double box);

struct KernelChoice {
  KernelType type = KernelType::Rbf;
  double sigma = 0.0;  // <= 0 selects the per-cluster median heuristic
};

struct HypersphereModel {
  ClusterModel clusters;
  std::vector<Hypersphere> spheres;
  double nu = 0.1;
};

inline constexpr std::size_t kDefaultClusters = 10;
inline constexpr double kDefaultNu = 0.1;

/// k-means followed by one SVDD sphere per non-empty cluster.
HypersphereModel fit_mcsvm(const FeatureMatrix& z, std::size_t k, double nu, const KernelChoice& kernel,
                           std::uint64_t seed, const SvddOptions& options = {});

/// min_k ||phi(z) - c_k||^2 - R_k^2
double local_score(std::span<const double> z, const HypersphereModel& model);
std::vector<double> local_scores(const FeatureMatrix& z, const HypersphereModel& model);

// ---------------------------------------------------------------------------
// Fusion and evaluation

enum class ScoreKind { Local, Global, Normalized, Glocal };

struct ScoreVector {
  std::vector<double> values;
  ScoreKind kind = ScoreKind::Local;
};

inline constexpr double kDefaultThreshold = -0.9;

/// (v - mean) / std with the population standard deviation.
ScoreVector normalize_scores(const ScoreVector& v);

/// norm(local) + norm(global)
ScoreVector glocal_score(const ScoreVector& local, const ScoreVector& global);

std::vector<bool> decide_novel(const ScoreVector& glocal, double threshold = kDefaultThreshold);

/// Mann-Whitney estimate of P(score_pos > score_neg), ties counted one half.
double auc(std::span<const double> scores, const std::vector<bool>& labels);

}  // namespace glocal::scoring
