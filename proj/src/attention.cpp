#include "glocal/attention.hpp"

#include <cmath>
#include <string>

#include "glocal/error.hpp"
#include "glocal/parallel.hpp"
#include "glocal/rng.hpp"

namespace glocal::attention {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void expect_shape(const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, const char* name) {
  if (m.rows() != r || m.cols() != c) {
    throw ShapeError(std::string(name) + " is " + shape_str(m.rows(), m.cols()) + ", expected " + shape_str(r, c));
  }
}

Eigen::MatrixXd to_eigen(const FeatureMatrix& m) {
  Eigen::MatrixXd out(Eigen::Index(m.rows()), Eigen::Index(m.dim()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.dim(); ++j) out(Eigen::Index(i), Eigen::Index(j)) = m(i, j);
  }
  return out;
}

FeatureMatrix from_eigen(const Eigen::MatrixXd& m) {
  FeatureMatrix out(std::size_t(m.rows()), std::size_t(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(std::size_t(i), std::size_t(j)) = float(m(i, j));
  }
  return out;
}

}  // namespace

LatentTensor make_tensor(std::size_t c, std::size_t h, std::size_t w, std::span<const float> flat) {
  if (flat.size() != c * h * w) {
    throw ShapeError("flattened tensor has " + std::to_string(flat.size()) + " values, expected C*H*W = " +
                     std::to_string(c * h * w));
  }
  LatentTensor t;
  t.channels = c;
  t.height = h;
  t.width = w;
  t.data.resize(Eigen::Index(c), Eigen::Index(h * w));
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < h * w; ++p) t.data(Eigen::Index(ch), Eigen::Index(p)) = flat[ch * h * w + p];
  }
  return t;
}

void validate(const LatentTensor& f) {
  if (f.channels == 0 || f.channels % kChannelReduction != 0) {
    throw ShapeError("channel count " + std::to_string(f.channels) + " must be a positive multiple of 8");
  }
  expect_shape(f.data, Eigen::Index(f.channels), Eigen::Index(f.positions()), "latent tensor");
  if (!f.data.allFinite()) throw DataError("latent tensor has non-finite entries");
}

void validate(const SaWeights& w) {
  const auto c = w.w_v.rows();
  if (c == 0 || c % Eigen::Index(kChannelReduction) != 0) {
    throw ShapeError("weight channel count " + std::to_string(c) + " must be a positive multiple of 8");
  }
  const auto reduced = c / Eigen::Index(kChannelReduction);
  expect_shape(w.w_q, c, reduced, "W_q");
  expect_shape(w.w_k, c, reduced, "W_k");
  expect_shape(w.w_v, c, c, "W_v");
  expect_shape(w.w_o, c, c, "W_o");
  if (!std::isfinite(w.gamma)) throw DataError("gamma is not finite");
}

QkvMaps project_qkv(const LatentTensor& f, const SaWeights& w) {
  validate(f);
  validate(w);
  if (std::size_t(w.w_v.rows()) != f.channels) {
    throw ShapeError("weights are for " + std::to_string(w.w_v.rows()) + " channels, tensor has " +
                     std::to_string(f.channels));
  }
  return {w.w_q.transpose() * f.data, w.w_k.transpose() * f.data, w.w_v.transpose() * f.data};
}

Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, SoftmaxMode mode) {
  if (q.rows() != k.rows() || q.cols() != k.cols()) {
    throw ShapeError("query " + shape_str(q.rows(), q.cols()) + " and key " + shape_str(k.rows(), k.cols()) +
                     " maps differ");
  }
  // scores(i, j) = q_i . k_j
  const Eigen::MatrixXd scores = q.transpose() * k;
  const Eigen::Index n = scores.rows();
  Eigen::MatrixXd beta(n, n);
  if (mode == SoftmaxMode::PerQuery) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double mx = scores.col(j).maxCoeff();
      double denom = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        beta(j, i) = std::exp(scores(i, j) - mx);
        denom += beta(j, i);
      }
      beta.row(j) /= denom;
    }
  } else {
    const double mx = scores.maxCoeff();
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        beta(j, i) = std::exp(scores(i, j) - mx);
        denom += beta(j, i);
      }
    }
    beta /= denom;
  }
  return beta;
}

Eigen::MatrixXd attention_output(const LatentTensor& f, const SaWeights& w, SoftmaxMode mode) {
  const QkvMaps maps = project_qkv(f, w);
  const Eigen::MatrixXd beta = attention_weights(maps.q, maps.k, mode);
  // Column j of V * beta^T is sum_i beta(j, i) v_i.
  return w.w_o.transpose() * (maps.v * beta.transpose());
}

LatentTensor sa_forward(const LatentTensor& f, const SaWeights& w, SoftmaxMode mode) {
  LatentTensor out = f;
  if (w.gamma == 0.0) {
    validate(f);
    validate(w);
    return out;
  }
  out.data = w.gamma * attention_output(f, w, mode) + f.data;
  return out;
}

FeatureMatrix sa_forward_batch(const FeatureMatrix& litho, std::size_t c, std::size_t h, std::size_t w,
                               const SaWeights& weights, SoftmaxMode mode) {
  if (litho.dim() != c * h * w) {
    throw ShapeError("feature rows have " + std::to_string(litho.dim()) + " values, shape C,H,W implies " +
                     std::to_string(c * h * w));
  }
  FeatureMatrix out(litho.rows(), litho.dim(), FeatureRole::LocalSA);
  parallel_for(litho.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const LatentTensor t = sa_forward(make_tensor(c, h, w, litho.row(r)), weights, mode);
      auto dst = out.row(r);
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < h * w; ++p) dst[ch * h * w + p] = float(t.data(Eigen::Index(ch), Eigen::Index(p)));
      }
    }
  });
  return out;
}

SaWeights random_weights(std::size_t channels, std::uint64_t seed) {
  if (channels == 0 || channels % kChannelReduction != 0) {
    throw ShapeError("channel count must be a positive multiple of 8");
  }
  const auto c = Eigen::Index(channels);
  const auto reduced = c / Eigen::Index(kChannelReduction);
  CounterRng rng{seed, 0x5a};
  auto fill = [&](Eigen::Index r, Eigen::Index cols) {
    Eigen::MatrixXd m(r, cols);
    for (Eigen::Index i = 0; i < r; ++i) {
      // Rounded through float so saved weights reload bit-identically.
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = double(float(rng.uniform(-0.05, 0.05)));
    }
    return m;
  };
  SaWeights w;
  w.w_q = fill(c, reduced);
  w.w_k = fill(c, reduced);
  w.w_v = fill(c, c);
  w.w_o = fill(c, c);
  w.gamma = 1.0;
  return w;
}

SaWeights load_weights(const std::filesystem::path& dir) {
  SaWeights w;
  w.w_q = to_eigen(load_feature_matrix(dir / "wq.glfm"));
  w.w_k = to_eigen(load_feature_matrix(dir / "wk.glfm"));
  w.w_v = to_eigen(load_feature_matrix(dir / "wv.glfm"));
  w.w_o = to_eigen(load_feature_matrix(dir / "wo.glfm"));
  const FeatureMatrix g = load_feature_matrix(dir / "gamma.glfm");
  if (g.rows() != 1 || g.dim() != 1) throw FormatError("gamma.glfm must be 1x1");
  w.gamma = g(0, 0);
  validate(w);
  return w;
}

void save_weights(const SaWeights& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_feature_matrix(from_eigen(w.w_q), dir / "wq.glfm");
  save_feature_matrix(from_eigen(w.w_k), dir / "wk.glfm");
  save_feature_matrix(from_eigen(w.w_v), dir / "wv.glfm");
  save_feature_matrix(from_eigen(w.w_o), dir / "wo.glfm");
  FeatureMatrix g(1, 1);
  g(0, 0) = float(w.gamma);
  save_feature_matrix(g, dir / "gamma.glfm");
}

}  // namespace glocal::attention
