#include "glocal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "glocal/error.hpp"

namespace glocal::synthetic {

namespace fs = std::filesystem;

double Gaussian::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - rng_.uniform();  // (0, 1]
  const double u2 = rng_.uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  spare_ = radius * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return radius * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

void fill_rect(GrayImage& img, std::uint32_t x0, std::uint32_t y0, std::uint32_t x1, std::uint32_t y1) {
  for (std::uint32_t y = y0; y < std::min(y1, img.height); ++y) {
    for (std::uint32_t x = x0; x < std::min(x1, img.width); ++x) img.at(x, y) = 255;
  }
}

GrayImage blank(std::uint32_t size) { return {size, size, std::vector<std::uint8_t>(std::size_t(size) * size, 0)}; }

/// Horizontal wires of varying pitch with line-end gaps.
GrayImage regular_layout(std::uint32_t size, CounterRng& rng) {
  GrayImage img = blank(size);
  std::uint32_t y = 2 + std::uint32_t(rng.below(4));
  while (y + 3 < size) {
    const std::uint32_t h = 3 + std::uint32_t(rng.below(3));
    const std::uint32_t gap_at = 8 + std::uint32_t(rng.below(size - 16));
    fill_rect(img, 0, y, gap_at, y + h);
    fill_rect(img, gap_at + 4 + std::uint32_t(rng.below(4)), y, size, y + h);
    y += h + 4 + std::uint32_t(rng.below(4));
  }
  return img;
}

/// Contact arrays next to vertical straps, a pattern family absent from training.
GrayImage novel_layout(std::uint32_t size, CounterRng& rng) {
  GrayImage img = blank(size);
  const std::uint32_t pitch = 10 + std::uint32_t(rng.below(4));
  const std::uint32_t offset = 2 + std::uint32_t(rng.below(4));
  for (std::uint32_t y = offset; y + 6 < size; y += pitch) {
    for (std::uint32_t x = offset; x + 6 < size / 2; x += pitch) fill_rect(img, x, y, x + 6, y + 6);
  }
  for (std::uint32_t x = size / 2 + 2; x + 4 < size; x += 9 + std::uint32_t(rng.below(3))) {
    fill_rect(img, x, 0, x + 4, size);
  }
  return img;
}

/// Corner rounding by a 3x3 box blur stands in for the shape predictor.
GrayImage predict(const GrayImage& layout) {
  GrayImage out = layout;
  const int w = int(layout.width), h = int(layout.height);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sum = 0, cnt = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          sum += layout.at(std::uint32_t(xx), std::uint32_t(yy));
          ++cnt;
        }
      }
      out.at(std::uint32_t(x), std::uint32_t(y)) = std::uint8_t((sum + cnt / 2) / cnt);
    }
  }
  return out;
}

/// Measured contour: prediction plus small noise, with `defects` interior
/// patches replaced by the inverted prediction.
GrayImage measure(const GrayImage& pred, std::size_t defects, std::size_t grid, CounterRng& rng) {
  GrayImage out = pred;
  for (auto& v : out.pixels) v = std::uint8_t(std::clamp(int(v) + int(rng.below(13)) - 6, 0, 255));
  const std::uint32_t patch = pred.width / std::uint32_t(grid);
  std::vector<std::size_t> interior;
  for (std::size_t r = 1; r + 1 < grid; ++r) {
    for (std::size_t c = 1; c + 1 < grid; ++c) interior.push_back(r * grid + c);
  }
  for (std::size_t d = 0; d < defects && !interior.empty(); ++d) {
    const std::size_t pick = std::size_t(rng.below(interior.size()));
    const std::size_t cell = interior[pick];
    interior.erase(interior.begin() + std::ptrdiff_t(pick));
    const auto y0 = std::uint32_t(cell / grid) * patch;
    const auto x0 = std::uint32_t(cell % grid) * patch;
    for (std::uint32_t y = y0; y < y0 + patch; ++y) {
      for (std::uint32_t x = x0; x < x0 + patch; ++x) out.at(x, y) = std::uint8_t(255 - pred.at(x, y));
    }
  }
  return out;
}

std::vector<double> random_direction(std::size_t dim, Gaussian& gauss) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = gauss();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

void write_image_corpus(const fs::path& dir, const ImageCorpusSpec& spec) {
  constexpr std::size_t kGrid = 16;
  if (spec.size % kGrid != 0) throw ParamError("image size must be a multiple of 16");
  fs::create_directories(dir / "img");
  CounterRng rng{spec.seed, 0x1a40};
  Gaussian gauss(spec.seed, 0x1a7e);

  const std::size_t latent = spec.channels * spec.latent_hw * spec.latent_hw;
  // Two regular latent modes and one novel mode.
  std::vector<std::vector<double>> modes;
  for (int m = 0; m < 3; ++m) {
    auto d = random_direction(latent, gauss);
    for (double& x : d) x *= 4.0;
    modes.push_back(std::move(d));
  }

  DatasetManifest train, pool;
  FeatureMatrix litho_train(spec.train, latent, FeatureRole::LocalSA);
  FeatureMatrix litho_pool(spec.pool_regular + spec.pool_novel, latent, FeatureRole::LocalSA);

  auto make_sample = [&](const std::string& id, bool novel, std::size_t defects, FeatureMatrix& litho,
                         std::size_t row) {
    const GrayImage layout = novel ? novel_layout(spec.size, rng) : regular_layout(spec.size, rng);
    const GrayImage pred = predict(layout);
    const GrayImage sem = measure(pred, defects, kGrid, rng);
    const fs::path rel_layout = fs::path("img") / (id + "_layout.pgm");
    const fs::path rel_pred = fs::path("img") / (id + "_pred.pgm");
    const fs::path rel_sem = fs::path("img") / (id + "_sem.pgm");
    save_image(layout, dir / rel_layout);
    save_image(pred, dir / rel_pred);
    save_image(sem, dir / rel_sem);
    const auto& mode = modes[novel ? 2 : rng.below(2)];
    auto out = litho.row(row);
    for (std::size_t j = 0; j < latent; ++j) out[j] = float(mode[j] + 0.5 * gauss());
    return ManifestEntry{id, rel_layout, rel_pred, rel_sem};
  };

  for (std::size_t i = 0; i < spec.train; ++i) {
    train.entries.push_back(make_sample("t" + std::to_string(1000 + i).substr(1), false, 0, litho_train, i));
  }
  for (std::size_t i = 0; i < spec.pool_regular; ++i) {
    // A few regular samples carry isolated defects below the novelty count.
    const std::size_t defects = i % 4 == 0 ? 2 : 0;
    pool.entries.push_back(make_sample("r" + std::to_string(1000 + i).substr(1), false, defects, litho_pool, i));
  }
  for (std::size_t i = 0; i < spec.pool_novel; ++i) {
    const std::size_t defects = 6 + std::size_t(rng.below(4));
    pool.entries.push_back(
        make_sample("n" + std::to_string(1000 + i).substr(1), true, defects, litho_pool, spec.pool_regular + i));
  }

  // Manifests store paths relative to their own directory.
  save_manifest(train, dir / "train.tsv");
  save_manifest(pool, dir / "pool.tsv");
  save_feature_matrix(litho_train, dir / "litho_train.glfm");
  save_feature_matrix(litho_pool, dir / "litho_pool.glfm");
  write_text_file(dir / "glocal.cfg",
                  "# Bundled synthetic corpus; paths are relative to this file.\n"
                  "train_manifest = train.tsv\n"
                  "pool_manifest = pool.tsv\n"
                  "litho_train = litho_train.glfm\n"
                  "litho_pool = litho_pool.glfm\n"
                  "shape = " +
                      std::to_string(spec.channels) + "," + std::to_string(spec.latent_hw) + "," +
                      std::to_string(spec.latent_hw) +
                      "\n"
                      "r = 8\n"
                      "K = 2\n"
                      "nu = 0.1\n"
                      "grid = 16\n"
                      "tau = 5\n"
                      "threshold = -0.9\n"
                      "k = 4\n"
                      "n_s = 6\n"
                      "batch = 3\n"
                      "epochs = 20\n"
                      "strategy = ins\n"
                      "seed = 7\n"
                      "out_dir = out\n");
}

FeatureCorpus feature_corpus(std::size_t n_train, std::size_t n_pool_regular, std::size_t n_pool_novel,
                             std::uint64_t seed) {
  constexpr std::size_t kSaDim = 16;
  constexpr std::size_t kYDim = 32;
  constexpr std::size_t kSubspace = 4;
  constexpr double kClusterOffset = 4.0;
  constexpr double kNovelSaShift = 3.3;
  constexpr double kOffSubspaceRegular = 0.3;
  constexpr double kOffSubspaceNovel = 0.37;

  Gaussian gauss(seed, 0xfc);
  FeatureCorpus c;
  c.subspace_dim = kSubspace;
  const auto novel_dir = random_direction(kSaDim, gauss);

  auto sample = [&](bool novel, std::size_t i, FeatureMatrix& sa, FeatureMatrix& y) {
    const double side = (i % 2 == 0) ? kClusterOffset : -kClusterOffset;
    auto s = sa.row(i);
    for (std::size_t j = 0; j < kSaDim; ++j) s[j] = float(gauss());
    s[0] += float(side);
    if (novel) {
      for (std::size_t j = 0; j < kSaDim; ++j) s[j] += float(kNovelSaShift * novel_dir[j]);
    }
    // Image-space vector: a point of a fixed principal subspace plus
    // isotropic residual, which is larger for novel samples.
    auto v = y.row(i);
    const double off = novel ? kOffSubspaceNovel : kOffSubspaceRegular;
    for (std::size_t j = 0; j < kYDim; ++j) v[j] = float((j < kSubspace ? 2.0 * gauss() : 0.0) + off * gauss());
  };

  c.train_sa = FeatureMatrix(n_train, kSaDim, FeatureRole::LocalSA);
  c.train_y = FeatureMatrix(n_train, kYDim);
  for (std::size_t i = 0; i < n_train; ++i) sample(false, i, c.train_sa, c.train_y);

  const std::size_t n_pool = n_pool_regular + n_pool_novel;
  c.pool_sa = FeatureMatrix(n_pool, kSaDim, FeatureRole::LocalSA);
  c.pool_y = FeatureMatrix(n_pool, kYDim);
  c.pool_novel.assign(n_pool, false);
  for (std::size_t i = 0; i < n_pool; ++i) {
    const bool novel = i >= n_pool_regular;
    c.pool_novel[i] = novel;
    sample(novel, i, c.pool_sa, c.pool_y);
  }
  return c;
}

BlobData two_blobs(std::size_t per_blob, std::uint64_t seed, std::size_t ae_dim, std::size_t sa_dim) {
  Gaussian gauss(seed, 0xb10b);
  BlobData d{FeatureMatrix(2 * per_blob, ae_dim), FeatureMatrix(2 * per_blob, sa_dim, FeatureRole::LocalSA), {}};
  for (std::size_t i = 0; i < 2 * per_blob; ++i) {
    const int blob = i < per_blob ? 0 : 1;
    d.blob.push_back(blob);
    for (std::size_t j = 0; j < ae_dim; ++j) d.f_ae(i, j) = float((blob ? 12.0 : 0.0) + gauss());
    for (std::size_t j = 0; j < sa_dim; ++j) {
      const double center = (j % 2 == std::size_t(blob)) ? 6.0 : 1.0;
      d.f_sa(i, j) = float(center + 0.5 * gauss());
    }
  }
  return d;
}

BlobData gaussian_mixture(std::size_t n, std::size_t centers, std::uint64_t seed, std::size_t ae_dim,
                          std::size_t sa_dim) {
  if (centers == 0) throw ParamError("gaussian_mixture needs at least one center");
  Gaussian gauss(seed, 0x3170);
  CounterRng& u = gauss.uniform();
  std::vector<std::vector<double>> ae_c(centers, std::vector<double>(ae_dim));
  std::vector<std::vector<double>> sa_c(centers, std::vector<double>(sa_dim));
  for (std::size_t c = 0; c < centers; ++c) {
    for (double& x : ae_c[c]) x = u.uniform(-6.0, 6.0);
    for (double& x : sa_c[c]) x = u.uniform(2.0, 8.0);
  }
  BlobData d{FeatureMatrix(n, ae_dim), FeatureMatrix(n, sa_dim, FeatureRole::LocalSA), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = std::size_t(u.below(centers));
    d.blob.push_back(int(c));
    for (std::size_t j = 0; j < ae_dim; ++j) d.f_ae(i, j) = float(ae_c[c][j] + gauss());
    for (std::size_t j = 0; j < sa_dim; ++j) d.f_sa(i, j) = float(sa_c[c][j] + 0.5 * gauss());
  }
  return d;
}

}  // namespace glocal::synthetic
