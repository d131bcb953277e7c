#pragma once

// Novelty annotation from disagreement between a shape predictor and the
// measured ground truth: per-pixel L1 deformation, patch statistics, and a
// corpus-wide 3-sigma threshold.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "glocal/io.hpp"

namespace glocal::migna {

inline constexpr std::size_t kDefaultGridSize = 16;
inline constexpr double kSigmaMultiplier = 3.0;

struct DeformationMap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> values;  // |pred - gt|, row-major
};

struct CorpusL1Stats {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n_patches = 0;
};

/// grid_size x grid_size patches, row-major by patch row.
struct PatchGrid {
  std::size_t grid_size = 0;
  std::vector<bool> retained;
  std::vector<bool> anomaly;
  std::vector<double> patch_l1;

  std::size_t anomaly_count() const;
  std::size_t retained_count() const;
};

DeformationMap deformation_map(const GrayImage& pred, const GrayImage& gt);

/// Mean absolute difference of every patch (retained or not).
std::vector<double> patch_means(const DeformationMap& map, std::size_t grid_size);

/// Perimeter patches of the grid are dropped from annotation.
bool is_border_patch(std::size_t row, std::size_t col, std::size_t grid_size);

CorpusL1Stats corpus_stats(std::span<const DeformationMap> maps, std::size_t grid_size = kDefaultGridSize);

PatchGrid patch_anomalies(const DeformationMap& map, const CorpusL1Stats& stats,
                          std::size_t grid_size = kDefaultGridSize);

bool label_novelty(const PatchGrid& grid, std::size_t tau);

}  // namespace glocal::migna
