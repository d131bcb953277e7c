#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "glocal/embed.hpp"
#include "glocal/error.hpp"
#include "test_util.hpp"

using namespace glocal;
using namespace glocal::embed;
using glocal::testing::random_matrix;
using glocal::testing::TempDir;

namespace {

Eigen::VectorXd as_vector(std::span<const float> row) {
  Eigen::VectorXd v(Eigen::Index(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i) v(Eigen::Index(i)) = row[i];
  return v;
}

}  // namespace

TEST(FitEmbedder, SingleAxisData) {
  FeatureMatrix x(6, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    x(i, 0) = 2.0f;
    x(i, 1) = float(i) - 2.5f;
    x(i, 2) = -1.0f;
  }
  const auto model = fit_embedder(x, 1);
  ASSERT_EQ(model.latent_dim(), 1u);
  EXPECT_NEAR(model.basis(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(model.basis(1, 0), 1.0, 1e-12);
  EXPECT_NEAR(model.basis(2, 0), 0.0, 1e-12);
  EXPECT_NEAR(model.mean(0), 2.0, 1e-12);
  EXPECT_NEAR(model.mean(1), 0.0, 1e-12);
}

TEST(FitEmbedder, BasisIsOrthonormalAndSignFixed) {
  const auto x = random_matrix(30, 8, 5);
  const auto model = fit_embedder(x, 5);
  const Eigen::MatrixXd gram = model.basis.transpose() * model.basis;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-6);
  for (Eigen::Index c = 0; c < model.basis.cols(); ++c) {
    Eigen::Index first = 0;
    while (std::abs(model.basis(first, c)) <= 1e-12) ++first;
    EXPECT_GT(model.basis(first, c), 0.0);
  }
}

TEST(FitEmbedder, FullRankReconstructsTrainingRows) {
  const auto x = random_matrix(10, 4, 6);
  const auto model = fit_embedder(x, 4);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    EXPECT_LT((reconstruct(model, x.row(i)) - as_vector(x.row(i))).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(FitEmbedder, RankDeficientDataReconstructsAtItsRank) {
  // Rows lie on a 2-D affine plane in R^5.
  CounterRng rng{8};
  FeatureMatrix x(12, 5);
  for (std::size_t i = 0; i < 12; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    const double row[5] = {1 + a, a - b, 2 * b, 0.5, a + b};
    for (std::size_t j = 0; j < 5; ++j) x(i, j) = float(row[j]);
  }
  const auto model = fit_embedder(x, 2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    EXPECT_LT((reconstruct(model, x.row(i)) - as_vector(x.row(i))).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(FitEmbedder, ResidualEqualsDiscardedScatterEigenvalues) {
  const auto x = random_matrix(20, 5, 7);
  const auto model = fit_embedder(x, 3);
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += global_score(x.row(i), reconstruct(model, x.row(i)));

  // Oracle: eigenvalues of the centered scatter matrix.
  Eigen::MatrixXd data(20, 5);
  for (Eigen::Index i = 0; i < 20; ++i) data.row(i) = as_vector(x.row(std::size_t(i))).transpose();
  const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered.transpose() * centered);
  const double expected = es.eigenvalues()(0) + es.eigenvalues()(1);  // ascending order
  EXPECT_NEAR(total, expected, 1e-9 * std::max(1.0, expected));
}

TEST(FitEmbedder, InvalidRankThrows) {
  const auto x = random_matrix(4, 6, 9);
  EXPECT_THROW(fit_embedder(x, 0), ParamError);
  EXPECT_THROW(fit_embedder(x, 5), ParamError);
  EXPECT_NO_THROW(fit_embedder(x, 4));
}

TEST(Reconstruct, MeanSpanAndOrthogonalCases) {
  LinearEmbedder model;
  model.mean = Eigen::Vector3d(1, 2, 3);
  model.basis = Eigen::MatrixXd::Zero(3, 1);
  model.basis(0, 0) = 1.0;
  EXPECT_LT((reconstruct(model, Eigen::VectorXd(model.mean)) - model.mean).norm(), 1e-12);
  const Eigen::Vector3d in_span(5, 2, 3);
  EXPECT_LT((reconstruct(model, Eigen::VectorXd(in_span)) - in_span).norm(), 1e-6);
  const Eigen::Vector3d orthogonal(1, 7, -4);
  EXPECT_LT((reconstruct(model, Eigen::VectorXd(orthogonal)) - model.mean).norm(), 1e-12);
  const float code_in[3] = {5, 2, 3};
  EXPECT_NEAR(encode(model, code_in)(0), 4.0, 1e-12);
}

TEST(Reconstruct, DimensionMismatchThrows) {
  const auto model = fit_embedder(random_matrix(5, 3, 1), 2);
  EXPECT_THROW(reconstruct(model, Eigen::VectorXd::Zero(4)), ShapeError);
}

TEST(GlobalScore, Cases) {
  const std::vector<double> y{1, 2, 3};
  EXPECT_EQ(global_score(y, y), 0.0);
  EXPECT_EQ(global_score(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2.5, 3}), 0.25);
  const std::vector<double> a{0, 1, 1, 0, 1}, b{1, 1, 0, 0, 0};
  EXPECT_EQ(global_score(a, b), 3.0);
}

TEST(GlobalScore, TrainingDataScoresBelowOffSubspaceData) {
  // Training rows live in the first two coordinates; the probe rows do not.
  CounterRng rng{12};
  FeatureMatrix train(40, 6), probe(40, 6);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      train(i, j) = j < 2 ? float(rng.uniform(-3, 3)) : float(rng.uniform(-0.01, 0.01));
      probe(i, j) = float(rng.uniform(-3, 3));
    }
  }
  const auto model = fit_embedder(train, 2);
  const auto in = global_scores(model, train);
  const auto out = global_scores(model, probe);
  double mean_in = 0, mean_out = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_GE(in[i], 0.0);
    mean_in += in[i] / 40;
    mean_out += out[i] / 40;
  }
  EXPECT_LE(mean_in, mean_out);
}

TEST(EmbedderIo, RoundTrip) {
  TempDir dir;
  const auto model = fit_embedder(random_matrix(12, 7, 2), 3);
  save_embedder(model, dir.path() / "model");
  const auto m = load_feature_matrix(dir.path() / "model" / "mean.glfm");
  EXPECT_EQ(m.rows(), 1u);
  EXPECT_EQ(m.dim(), 7u);
  const auto b = load_feature_matrix(dir.path() / "model" / "basis.glfm");
  EXPECT_EQ(b.rows(), 7u);
  EXPECT_EQ(b.dim(), 3u);
  const auto back = load_embedder(dir.path() / "model");
  EXPECT_LT((back.basis - model.basis).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LT((back.mean - model.mean).cwiseAbs().maxCoeff(), 1e-6);
}
