#include "glocal/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "glocal/error.hpp"

namespace glocal {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kGlfmMagic{'G', 'L', 'F', 'M'};
constexpr std::uint8_t kGlfmVersion = 1;
constexpr std::size_t kGlfmHeader = 4 + 1 + 4 + 4;

std::uint32_t read_u32_le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> lines_of(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

double parse_double(std::string_view cell, const std::string& where) {
  cell = trim(cell);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw FormatError(where + ": not a number: '" + std::string(cell) + "'");
  }
  return v;
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim, FeatureRole role)
    : rows_(rows), dim_(dim), data_(rows * dim, 0.0f), role_(role) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> data, FeatureRole role)
    : rows_(rows), dim_(dim), data_(std::move(data)), role_(role) {
  if (data_.size() != rows * dim) {
    throw ShapeError("feature matrix payload has " + std::to_string(data_.size()) + " values, expected " +
                     std::to_string(rows * dim));
  }
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
  FeatureMatrix out(idx.size(), dim_, role_);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows_) throw ShapeError("row index out of range");
    std::copy_n(data_.begin() + idx[r] * dim_, dim_, out.data_.begin() + r * dim_);
  }
  return out;
}

void FeatureMatrix::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw DataError("non-finite value at row " + std::to_string(i / dim_) + ", column " +
                      std::to_string(i % dim_));
    }
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format_double(double v, int digits) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, digits);
  return std::string(buf.data(), ptr);
}

// ---------------------------------------------------------------------------
// Feature matrices

FeatureMatrix parse_feature_csv(const std::string& text, FeatureRole role) {
  std::vector<float> data;
  std::size_t rows = 0;
  std::size_t dim = 0;
  for (auto line : lines_of(text)) {
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (rows == 0) {
      dim = cells.size();
    } else if (cells.size() != dim) {
      throw FormatError("csv row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(dim));
    }
    for (auto c : cells) {
      double v = parse_double(c, "csv row " + std::to_string(rows + 1));
      if (!std::isfinite(v)) throw DataError("non-finite value in csv row " + std::to_string(rows + 1));
      data.push_back(float(v));
    }
    ++rows;
  }
  if (rows == 0 || dim == 0) throw FormatError("csv feature matrix is empty");
  FeatureMatrix m(rows, dim, std::move(data), role);
  m.check_finite();
  return m;
}

FeatureMatrix load_feature_matrix(const fs::path& path, FeatureRole role) {
  std::string bytes = read_text_file(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kGlfmMagic.data(), 4) != 0) {
    // Anything that does not start with the binary magic is treated as CSV.
    return parse_feature_csv(bytes, role);
  }
  if (bytes.size() < kGlfmHeader) throw FormatError(path.string() + ": truncated GLFM header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (p[4] != kGlfmVersion) {
    throw FormatError(path.string() + ": unsupported GLFM version " + std::to_string(p[4]));
  }
  const std::uint32_t rows = read_u32_le(p + 5);
  const std::uint32_t dim = read_u32_le(p + 9);
  if (rows == 0 || dim == 0) throw FormatError(path.string() + ": GLFM declares an empty matrix");
  const std::uint64_t count = std::uint64_t(rows) * dim;
  if (bytes.size() - kGlfmHeader != count * 4) {
    throw FormatError(path.string() + ": GLFM declares " + std::to_string(rows) + "x" + std::to_string(dim) +
                      " but payload holds " + std::to_string((bytes.size() - kGlfmHeader) / 4.0) + " floats");
  }
  std::vector<float> data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(read_u32_le(p + kGlfmHeader + 4 * i));
  }
  FeatureMatrix m(rows, dim, std::move(data), role);
  m.check_finite();
  return m;
}

void save_feature_matrix(const FeatureMatrix& m, const fs::path& path) {
  std::string out(kGlfmMagic.begin(), kGlfmMagic.end());
  out.push_back(char(kGlfmVersion));
  put_u32_le(out, std::uint32_t(m.rows()));
  put_u32_le(out, std::uint32_t(m.dim()));
  out.reserve(out.size() + m.data().size() * 4);
  for (float v : m.data()) put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// PGM

GrayImage load_image(const fs::path& path) {
  std::string bytes = read_text_file(path);
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space_and_comments();
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError(path.string() + ": malformed PGM header");
    return std::stol(bytes.substr(start, pos - start));
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError(path.string() + ": not a binary PGM (P5)");
  }
  pos = 2;
  const long width = read_int();
  const long height = read_int();
  const long maxval = read_int();
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": invalid PGM dimensions");
  if (maxval != 255) throw FormatError(path.string() + ": PGM maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  ++pos;
  const std::size_t n = std::size_t(width) * std::size_t(height);
  if (bytes.size() - pos != n) throw FormatError(path.string() + ": PGM pixel payload size mismatch");

  GrayImage img;
  img.width = std::uint32_t(width);
  img.height = std::uint32_t(height);
  img.pixels.assign(bytes.begin() + std::ptrdiff_t(pos), bytes.end());
  return img;
}

void save_image(const GrayImage& img, const fs::path& path) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest load_manifest(const fs::path& path) {
  const std::string text = read_text_file(path);
  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  std::set<std::string, std::less<>> seen;
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto cells = split(line, '\t');
    if (cells.size() < 2 || cells.size() > 4) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 2-4 tab-separated fields");
    }
    ManifestEntry e;
    e.id = std::string(trim(cells[0]));
    if (e.id.empty()) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty sample id");
    if (!seen.insert(e.id).second) throw FormatError(path.string() + ": duplicate sample id '" + e.id + "'");
    auto field = [&](std::size_t i) -> std::optional<fs::path> {
      if (i >= cells.size()) return std::nullopt;
      auto c = trim(cells[i]);
      if (c.empty() || c == "-") return std::nullopt;
      fs::path p{std::string(c)};
      if (p.is_relative()) p = base / p;
      if (!fs::exists(p)) throw IoError("manifest entry '" + e.id + "': missing file " + p.string());
      return p;
    };
    e.layout = field(1);
    e.prediction = field(2);
    e.ground_truth = field(3);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::string out;
  auto put = [&](const std::optional<fs::path>& p) {
    out.push_back('\t');
    out += p ? p->generic_string() : "-";
  };
  for (const auto& e : manifest.entries) {
    out += e.id;
    put(e.layout);
    put(e.prediction);
    put(e.ground_truth);
    out.push_back('\n');
  }
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Score report

void write_score_report(const ScoreReport& report, const fs::path& path) {
  std::string out = "id,theta_local,theta_global,theta_novel,is_novel\n";
  for (const auto& r : report.rows) {
    out += r.id;
    out += ',' + format_double(r.theta_local);
    out += ',' + format_double(r.theta_global);
    out += ',' + format_double(r.theta_novel);
    out += r.is_novel ? ",true\n" : ",false\n";
  }
  write_text_file(path, out);
}

ScoreReport read_score_report(const fs::path& path) {
  const std::string text = read_text_file(path);
  auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "id,theta_local,theta_global,theta_novel,is_novel") {
    throw FormatError(path.string() + ": missing score report header");
  }
  ScoreReport report;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = split(trim(lines[i]), ',');
    if (cells.size() != 5) throw FormatError(path.string() + ":" + std::to_string(i + 1) + ": expected 5 cells");
    ScoreRow r;
    r.id = std::string(cells[0]);
    r.theta_local = parse_double(cells[1], path.string());
    r.theta_global = parse_double(cells[2], path.string());
    r.theta_novel = parse_double(cells[3], path.string());
    if (cells[4] == "true" || cells[4] == "1") {
      r.is_novel = true;
    } else if (cells[4] == "false" || cells[4] == "0") {
      r.is_novel = false;
    } else {
      throw FormatError(path.string() + ": bad is_novel value '" + std::string(cells[4]) + "'");
    }
    report.rows.push_back(std::move(r));
  }
  return report;
}

}  // namespace glocal
