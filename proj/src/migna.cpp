#include "glocal/migna.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "glocal/error.hpp"

namespace glocal::migna {

namespace {

void check_divisible(std::uint32_t width, std::uint32_t height, std::size_t grid_size) {
  if (grid_size == 0 || width % grid_size != 0 || height % grid_size != 0) {
    throw ShapeError("image " + std::to_string(width) + "x" + std::to_string(height) +
                     " is not divisible by grid size " + std::to_string(grid_size));
  }
}

}  // namespace

std::size_t PatchGrid::anomaly_count() const { return std::size_t(std::count(anomaly.begin(), anomaly.end(), true)); }

std::size_t PatchGrid::retained_count() const {
  return std::size_t(std::count(retained.begin(), retained.end(), true));
}

DeformationMap deformation_map(const GrayImage& pred, const GrayImage& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw ShapeError("prediction " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                     " vs ground truth " + std::to_string(gt.width) + "x" + std::to_string(gt.height));
  }
  DeformationMap map;
  map.width = pred.width;
  map.height = pred.height;
  map.values.resize(pred.pixels.size());
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    map.values[i] = std::uint8_t(std::abs(int(pred.pixels[i]) - int(gt.pixels[i])));
  }
  return map;
}

std::vector<double> patch_means(const DeformationMap& map, std::size_t grid_size) {
  check_divisible(map.width, map.height, grid_size);
  const std::size_t pw = map.width / grid_size;
  const std::size_t ph = map.height / grid_size;
  std::vector<std::uint64_t> sums(grid_size * grid_size, 0);
  for (std::size_t y = 0; y < map.height; ++y) {
    const std::size_t prow = y / ph;
    const std::uint8_t* line = map.values.data() + y * map.width;
    for (std::size_t x = 0; x < map.width; ++x) sums[prow * grid_size + x / pw] += line[x];
  }
  std::vector<double> means(sums.size());
  const double area = double(pw * ph);
  for (std::size_t i = 0; i < sums.size(); ++i) means[i] = double(sums[i]) / area;
  return means;
}

bool is_border_patch(std::size_t row, std::size_t col, std::size_t grid_size) {
  return row == 0 || col == 0 || row + 1 == grid_size || col + 1 == grid_size;
}

CorpusL1Stats corpus_stats(std::span<const DeformationMap> maps, std::size_t grid_size) {
  if (maps.empty()) throw EmptyError("corpus_stats needs at least one deformation map");
  const auto w = maps.front().width;
  const auto h = maps.front().height;

  // Per-map partial sums, combined in map order so the result does not depend
  // on how maps were produced.
  std::vector<double> retained;
  for (const auto& m : maps) {
    if (m.width != w || m.height != h) throw ShapeError("corpus maps differ in shape");
    auto means = patch_means(m, grid_size);
    for (std::size_t r = 0; r < grid_size; ++r) {
      for (std::size_t c = 0; c < grid_size; ++c) {
        if (!is_border_patch(r, c, grid_size)) retained.push_back(means[r * grid_size + c]);
      }
    }
  }
  CorpusL1Stats stats;
  stats.n_patches = retained.size();
  if (retained.empty()) return stats;
  double sum = 0.0;
  for (double v : retained) sum += v;
  stats.mean = sum / double(retained.size());
  double ss = 0.0;
  for (double v : retained) ss += (v - stats.mean) * (v - stats.mean);
  stats.std = std::sqrt(ss / double(retained.size()));
  return stats;
}

PatchGrid patch_anomalies(const DeformationMap& map, const CorpusL1Stats& stats, std::size_t grid_size) {
  PatchGrid grid;
  grid.grid_size = grid_size;
  grid.patch_l1 = patch_means(map, grid_size);
  grid.retained.assign(grid_size * grid_size, false);
  grid.anomaly.assign(grid_size * grid_size, false);
  const double threshold = stats.mean + kSigmaMultiplier * stats.std;
  for (std::size_t r = 0; r < grid_size; ++r) {
    for (std::size_t c = 0; c < grid_size; ++c) {
      const std::size_t i = r * grid_size + c;
      if (is_border_patch(r, c, grid_size)) continue;
      grid.retained[i] = true;
      grid.anomaly[i] = grid.patch_l1[i] > threshold;
    }
  }
  return grid;
}

bool label_novelty(const PatchGrid& grid, std::size_t tau) {
  if (tau == 0) throw ParamError("tau must be at least 1");
  return grid.anomaly_count() >= tau;
}

}  // namespace glocal::migna
