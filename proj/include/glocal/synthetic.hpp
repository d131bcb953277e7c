#pragma once

// Seeded synthetic data: a small layout/SEM image corpus for end-to-end runs
// and feature-level corpora with known novelty or cluster structure.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "glocal/io.hpp"
#include "glocal/rng.hpp"

namespace glocal::synthetic {

/// Standard normal draws from counter-keyed uniforms (Box-Muller).
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed, std::uint64_t stream = 0) : rng_{seed, stream, 0x6a55} {}
  double operator()();
  CounterRng& uniform() { return rng_; }

 private:
  CounterRng rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct ImageCorpusSpec {
  std::size_t train = 36;        // regular samples used for fitting
  std::size_t pool_regular = 12;
  std::size_t pool_novel = 12;
  std::uint32_t size = 64;       // square images
  std::size_t channels = 8;      // litho latent shape C,H,W
  std::size_t latent_hw = 4;
  std::uint64_t seed = 2024;
};

/// Writes img/*.pgm, train.tsv, pool.tsv, litho_train.glfm, litho_pool.glfm
/// and glocal.cfg under `dir`. Pool ids of novel samples start with "n".
void write_image_corpus(const std::filesystem::path& dir, const ImageCorpusSpec& spec = {});

/// Feature-level novelty corpus: SA features (local cue) and image-space
/// vectors (global cue). Novel pool samples are shifted in both spaces, each
/// shift on its own only partly separating them from the regular samples.
struct FeatureCorpus {
  FeatureMatrix train_sa;
  FeatureMatrix train_y;
  FeatureMatrix pool_sa;
  FeatureMatrix pool_y;
  std::vector<bool> pool_novel;
  std::size_t subspace_dim = 0;
};

FeatureCorpus feature_corpus(std::size_t n_train = 300, std::size_t n_pool_regular = 200,
                             std::size_t n_pool_novel = 100, std::uint64_t seed = 11);

/// Two well-separated Gaussian blobs; `blob` gives each row's membership.
struct BlobData {
  FeatureMatrix f_ae;
  FeatureMatrix f_sa;
  std::vector<int> blob;
};

BlobData two_blobs(std::size_t per_blob, std::uint64_t seed, std::size_t ae_dim = 2, std::size_t sa_dim = 4);

/// Isotropic mixture of `centers` Gaussians with unit spread; SA features are
/// offset from the origin so no row has zero norm.
BlobData gaussian_mixture(std::size_t n, std::size_t centers, std::uint64_t seed, std::size_t ae_dim = 4,
                          std::size_t sa_dim = 8);

}  // namespace glocal::synthetic
