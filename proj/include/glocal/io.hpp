#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace glocal {

enum class FeatureRole { GlobalAE, LocalSA };

/// Row-major N x D matrix of 32-bit floats, one row per sample.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim, FeatureRole role = FeatureRole::GlobalAE);
  FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
                FeatureRole role = FeatureRole::GlobalAE);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  FeatureRole role() const noexcept { return role_; }
  void set_role(FeatureRole role) noexcept { role_ = role; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  float operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
  float& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }

  const std::vector<float>& data() const noexcept { return data_; }

  /// Rows selected by index, in the given order.
  FeatureMatrix select_rows(std::span<const std::size_t> idx) const;

  /// Throws DataError on the first non-finite entry.
  void check_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  FeatureRole role_ = FeatureRole::GlobalAE;
};

struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(std::uint32_t x, std::uint32_t y) const { return pixels[std::size_t(y) * width + x]; }
  std::uint8_t& at(std::uint32_t x, std::uint32_t y) { return pixels[std::size_t(y) * width + x]; }
};

struct ManifestEntry {
  std::string id;
  std::optional<std::filesystem::path> layout;
  std::optional<std::filesystem::path> prediction;
  std::optional<std::filesystem::path> ground_truth;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

struct ScoreRow {
  std::string id;
  double theta_local = 0.0;
  double theta_global = 0.0;
  double theta_novel = 0.0;
  bool is_novel = false;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
};

// GLFM: "GLFM", version byte 1, u32 rows, u32 dim (little-endian), then rows*dim f32 LE.
FeatureMatrix load_feature_matrix(const std::filesystem::path& path,
                                  FeatureRole role = FeatureRole::GlobalAE);
void save_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix parse_feature_csv(const std::string& text, FeatureRole role = FeatureRole::GlobalAE);

GrayImage load_image(const std::filesystem::path& path);
void save_image(const GrayImage& img, const std::filesystem::path& path);

/// TSV "id<TAB>layout<TAB>prediction<TAB>ground_truth"; empty or "-" fields are absent.
/// Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

void write_score_report(const ScoreReport& report, const std::filesystem::path& path);
ScoreReport read_score_report(const std::filesystem::path& path);

/// Whole-file helpers shared by the text formats.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Shortest decimal form with `digits` significant digits.
std::string format_double(double v, int digits = 9);

}  // namespace glocal
