#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>

#include "glocal/io.hpp"

namespace glocal::attention {

/// C x (H*W) latent tensor; column p is the channel vector at spatial position p.
struct LatentTensor {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  Eigen::MatrixXd data;

  std::size_t positions() const { return height * width; }
};

/// 1x1-convolution projections. reduced() == channels / 8.
struct SaWeights {
  Eigen::MatrixXd w_q;  // C x C'
  Eigen::MatrixXd w_k;  // C x C'
  Eigen::MatrixXd w_v;  // C x C
  Eigen::MatrixXd w_o;  // C x C
  double gamma = 1.0;

  std::size_t channels() const { return std::size_t(w_v.rows()); }
};

struct QkvMaps {
  Eigen::MatrixXd q;  // C' x HW
  Eigen::MatrixXd k;  // C' x HW
  Eigen::MatrixXd v;  // C x HW
};

enum class SoftmaxMode {
  PerQuery,  // each query's weights sum to one
  Global,    // one normalizer over every (i, j) pair
};

inline constexpr std::size_t kChannelReduction = 8;

LatentTensor make_tensor(std::size_t c, std::size_t h, std::size_t w, std::span<const float> flat);
void validate(const LatentTensor& f);
void validate(const SaWeights& w);

QkvMaps project_qkv(const LatentTensor& f, const SaWeights& w);

/// beta(j, i): weight of key/value position i in output position j, computed
/// from s_ij = q_i . k_j with max-subtraction before exponentiation.
Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                  SoftmaxMode mode = SoftmaxMode::PerQuery);

/// Attention output O before the residual: o_j = W_o^T sum_i beta(j,i) v_i.
Eigen::MatrixXd attention_output(const LatentTensor& f, const SaWeights& w,
                                 SoftmaxMode mode = SoftmaxMode::PerQuery);

/// gamma * O + f.
LatentTensor sa_forward(const LatentTensor& f, const SaWeights& w, SoftmaxMode mode = SoftmaxMode::PerQuery);

/// Applies sa_forward to every row of a matrix of flattened C*H*W tensors
/// (channel-major). Rows are independent and processed in parallel.
FeatureMatrix sa_forward_batch(const FeatureMatrix& litho, std::size_t c, std::size_t h, std::size_t w,
                               const SaWeights& weights, SoftmaxMode mode = SoftmaxMode::PerQuery);

/// Uniform(-0.05, 0.05) entries, gamma = 1.
SaWeights random_weights(std::size_t channels, std::uint64_t seed);

/// <dir>/{wq,wk,wv,wo,gamma}.glfm
SaWeights load_weights(const std::filesystem::path& dir);
void save_weights(const SaWeights& w, const std::filesystem::path& dir);

}  // namespace glocal::attention
