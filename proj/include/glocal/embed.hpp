#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

#include "glocal/io.hpp"

namespace glocal::embed {

/// Principal-subspace embedder: reconstruct(y) = mean + B * B^T * (y - mean).
struct LinearEmbedder {
  Eigen::VectorXd mean;   // D
  Eigen::MatrixXd basis;  // D x r, orthonormal columns

  std::size_t dim() const { return std::size_t(mean.size()); }
  std::size_t latent_dim() const { return std::size_t(basis.cols()); }
};

/// Top-r principal directions of the centered rows of `train`. Each basis
/// vector is oriented so its first non-negligible component is positive.
LinearEmbedder fit_embedder(const FeatureMatrix& train, std::size_t r);

Eigen::VectorXd reconstruct(const LinearEmbedder& model, std::span<const float> y);
Eigen::VectorXd reconstruct(const LinearEmbedder& model, const Eigen::VectorXd& y);

/// Latent code B^T (y - mean); this is the f_AE feature used by the graph stage.
Eigen::VectorXd encode(const LinearEmbedder& model, std::span<const float> y);

/// Squared reconstruction residual ||y - y_hat||^2.
double global_score(std::span<const double> y, std::span<const double> y_hat);
double global_score(std::span<const float> y, const Eigen::VectorXd& y_hat);

/// Row-wise helpers over a whole matrix.
FeatureMatrix encode_all(const LinearEmbedder& model, const FeatureMatrix& x);
FeatureMatrix reconstruct_all(const LinearEmbedder& model, const FeatureMatrix& x);
std::vector<double> global_scores(const FeatureMatrix& y, const FeatureMatrix& y_hat);
std::vector<double> global_scores(const LinearEmbedder& model, const FeatureMatrix& y);

/// Persisted as <dir>/mean.glfm (1 x D) and <dir>/basis.glfm (D x r).
void save_embedder(const LinearEmbedder& model, const std::filesystem::path& dir);
LinearEmbedder load_embedder(const std::filesystem::path& dir);

}  // namespace glocal::embed
