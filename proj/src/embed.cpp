#include "glocal/embed.hpp"

#include <cmath>
#include <string>

#include "glocal/error.hpp"

namespace glocal::embed {

namespace {

constexpr double kSignEps = 1e-12;

Eigen::VectorXd to_vector(std::span<const float> y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v[Eigen::Index(i)] = y[i];
  return v;
}

void check_dim(const LinearEmbedder& model, std::size_t d) {
  if (d != model.dim()) {
    throw ShapeError("embedder expects dimension " + std::to_string(model.dim()) + ", got " + std::to_string(d));
  }
}

}  // namespace

LinearEmbedder fit_embedder(const FeatureMatrix& train, std::size_t r) {
  const auto n = Eigen::Index(train.rows());
  const auto d = Eigen::Index(train.dim());
  if (r == 0 || r > std::size_t(std::min(n, d))) {
    throw ParamError("latent dimension r=" + std::to_string(r) + " must be in [1, min(n, dim)=" +
                     std::to_string(std::min(n, d)) + "]");
  }
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = train.row(std::size_t(i));
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = row[std::size_t(j)];
  }
  LinearEmbedder model;
  model.mean = x.colwise().mean().transpose();
  x.rowwise() -= model.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  model.basis = svd.matrixV().leftCols(Eigen::Index(r));
  for (Eigen::Index c = 0; c < model.basis.cols(); ++c) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = model.basis(j, c);
      if (std::abs(v) > kSignEps) {
        if (v < 0) model.basis.col(c) *= -1.0;
        break;
      }
    }
  }
  return model;
}

Eigen::VectorXd reconstruct(const LinearEmbedder& model, const Eigen::VectorXd& y) {
  check_dim(model, std::size_t(y.size()));
  const Eigen::VectorXd centered = y - model.mean;
  return model.mean + model.basis * (model.basis.transpose() * centered);
}

Eigen::VectorXd reconstruct(const LinearEmbedder& model, std::span<const float> y) {
  return reconstruct(model, to_vector(y));
}

Eigen::VectorXd encode(const LinearEmbedder& model, std::span<const float> y) {
  check_dim(model, y.size());
  return model.basis.transpose() * (to_vector(y) - model.mean);
}

double global_score(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw ShapeError("global_score: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double diff = y[i] - y_hat[i];
    s += diff * diff;
  }
  return s;
}

double global_score(std::span<const float> y, const Eigen::VectorXd& y_hat) {
  if (y.size() != std::size_t(y_hat.size())) throw ShapeError("global_score: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double diff = double(y[i]) - y_hat[Eigen::Index(i)];
    s += diff * diff;
  }
  return s;
}

FeatureMatrix encode_all(const LinearEmbedder& model, const FeatureMatrix& x) {
  FeatureMatrix out(x.rows(), model.latent_dim(), FeatureRole::GlobalAE);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd z = encode(model, x.row(i));
    for (std::size_t j = 0; j < model.latent_dim(); ++j) out(i, j) = float(z[Eigen::Index(j)]);
  }
  return out;
}

FeatureMatrix reconstruct_all(const LinearEmbedder& model, const FeatureMatrix& x) {
  FeatureMatrix out(x.rows(), model.dim(), x.role());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd y = reconstruct(model, x.row(i));
    for (std::size_t j = 0; j < model.dim(); ++j) out(i, j) = float(y[Eigen::Index(j)]);
  }
  return out;
}

std::vector<double> global_scores(const FeatureMatrix& y, const FeatureMatrix& y_hat) {
  if (y.rows() != y_hat.rows() || y.dim() != y_hat.dim()) throw ShapeError("global_scores: shape mismatch");
  std::vector<double> out(y.rows());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double s = 0.0;
    auto a = y.row(i);
    auto b = y_hat.row(i);
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double diff = double(a[j]) - double(b[j]);
      s += diff * diff;
    }
    out[i] = s;
  }
  return out;
}

std::vector<double> global_scores(const LinearEmbedder& model, const FeatureMatrix& y) {
  std::vector<double> out(y.rows());
  for (std::size_t i = 0; i < y.rows(); ++i) out[i] = global_score(y.row(i), reconstruct(model, y.row(i)));
  return out;
}

void save_embedder(const LinearEmbedder& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t d = model.dim();
  const std::size_t r = model.latent_dim();
  FeatureMatrix mean(1, d);
  for (std::size_t j = 0; j < d; ++j) mean(0, j) = float(model.mean[Eigen::Index(j)]);
  FeatureMatrix basis(d, r);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < r; ++j) basis(i, j) = float(model.basis(Eigen::Index(i), Eigen::Index(j)));
  }
  save_feature_matrix(mean, dir / "mean.glfm");
  save_feature_matrix(basis, dir / "basis.glfm");
}

LinearEmbedder load_embedder(const std::filesystem::path& dir) {
  const FeatureMatrix mean = load_feature_matrix(dir / "mean.glfm");
  const FeatureMatrix basis = load_feature_matrix(dir / "basis.glfm");
  if (mean.rows() != 1 || basis.rows() != mean.dim()) {
    throw FormatError(dir.string() + ": embedder mean/basis shapes disagree");
  }
  LinearEmbedder model;
  model.mean.resize(Eigen::Index(mean.dim()));
  for (std::size_t j = 0; j < mean.dim(); ++j) model.mean[Eigen::Index(j)] = mean(0, j);
  model.basis.resize(Eigen::Index(basis.rows()), Eigen::Index(basis.dim()));
  for (std::size_t i = 0; i < basis.rows(); ++i) {
    for (std::size_t j = 0; j < basis.dim(); ++j) model.basis(Eigen::Index(i), Eigen::Index(j)) = basis(i, j);
  }
  return model;
}

}  // namespace glocal::embed
