#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>

#include "glocal/error.hpp"
#include "glocal/io.hpp"
#include "test_util.hpp"

using namespace glocal;
using glocal::testing::TempDir;

namespace {

std::string glfm_header(std::uint32_t rows, std::uint32_t dim) {
  std::string s = "GLFM";
  s.push_back(char(1));
  for (std::uint32_t v : {rows, dim}) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
  }
  return s;
}

void append_f32(std::string& s, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) s.push_back(char((u >> (8 * i)) & 0xff));
}

}  // namespace

TEST(FeatureMatrixIo, HandWrittenGlfmLoads) {
  TempDir dir;
  std::string bytes = glfm_header(2, 3);
  for (float v : {1.f, 2.f, 3.f, 4.f, 5.f, -6.5f}) append_f32(bytes, v);
  write_text_file(dir / "m.glfm", bytes);
  const auto m = load_feature_matrix(dir / "m.glfm");
  ASSERT_EQ(m.rows(), 2u);
  ASSERT_EQ(m.dim(), 3u);
  EXPECT_EQ(m(0, 0), 1.f);
  EXPECT_EQ(m(1, 2), -6.5f);
}

TEST(FeatureMatrixIo, RoundTripIsBitExact) {
  TempDir dir;
  auto m = glocal::testing::random_matrix(17, 5, 3, -1e6, 1e6);
  m(0, 0) = std::numeric_limits<float>::denorm_min();
  m(0, 1) = -0.0f;
  m(0, 2) = std::numeric_limits<float>::max();
  save_feature_matrix(m, dir / "m.glfm");
  const auto back = load_feature_matrix(dir / "m.glfm");
  ASSERT_EQ(back.rows(), m.rows());
  ASSERT_EQ(back.dim(), m.dim());
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.data()[i]), std::bit_cast<std::uint32_t>(m.data()[i]));
  }
}

TEST(FeatureMatrixIo, TruncatedPayloadIsFormatError) {
  TempDir dir;
  std::string bytes = glfm_header(2, 3);
  for (int i = 0; i < 5; ++i) append_f32(bytes, float(i));
  write_text_file(dir / "m.glfm", bytes);
  EXPECT_THROW(load_feature_matrix(dir / "m.glfm"), FormatError);
}

TEST(FeatureMatrixIo, BadVersionIsFormatError) {
  TempDir dir;
  std::string bytes = glfm_header(1, 1);
  bytes[4] = char(2);
  append_f32(bytes, 1.f);
  write_text_file(dir / "m.glfm", bytes);
  EXPECT_THROW(load_feature_matrix(dir / "m.glfm"), FormatError);
}

TEST(FeatureMatrixIo, NanInGlfmIsDataError) {
  TempDir dir;
  std::string bytes = glfm_header(1, 2);
  append_f32(bytes, 1.f);
  append_f32(bytes, std::numeric_limits<float>::quiet_NaN());
  write_text_file(dir / "m.glfm", bytes);
  EXPECT_THROW(load_feature_matrix(dir / "m.glfm"), DataError);
}

TEST(FeatureMatrixIo, CsvParses) {
  const auto m = parse_feature_csv("1,2\n3,4");
  ASSERT_EQ(m.rows(), 2u);
  ASSERT_EQ(m.dim(), 2u);
  EXPECT_EQ(m(0, 0), 1.f);
  EXPECT_EQ(m(0, 1), 2.f);
  EXPECT_EQ(m(1, 0), 3.f);
  EXPECT_EQ(m(1, 1), 4.f);
}

TEST(FeatureMatrixIo, CsvFileFallsBackFromMagic) {
  TempDir dir;
  write_text_file(dir / "m.csv", "0.5,1.5,2.5\n");
  const auto m = load_feature_matrix(dir / "m.csv");
  EXPECT_EQ(m.rows(), 1u);
  EXPECT_EQ(m(0, 2), 2.5f);
}

TEST(FeatureMatrixIo, CsvErrors) {
  EXPECT_THROW(parse_feature_csv("1,2\n3"), FormatError);
  EXPECT_THROW(parse_feature_csv("1,x\n"), FormatError);
  EXPECT_THROW(parse_feature_csv("1,nan\n"), DataError);
  EXPECT_THROW(parse_feature_csv("1,inf\n"), DataError);
}

TEST(ImageIo, P5Loads) {
  TempDir dir;
  std::string bytes = "P5\n2 2\n255\n";
  for (int v : {0, 255, 128, 64}) bytes.push_back(char(v));
  write_text_file(dir / "a.pgm", bytes);
  const auto img = load_image(dir / "a.pgm");
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.height, 2u);
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{0, 255, 128, 64}));
  EXPECT_EQ(img.at(1, 1), 64);
}

TEST(ImageIo, HeaderCommentsAreSkipped) {
  TempDir dir;
  std::string bytes = "P5\n# made by hand\n1 1\n255\n";
  bytes.push_back(char(7));
  write_text_file(dir / "a.pgm", bytes);
  EXPECT_EQ(load_image(dir / "a.pgm").pixels[0], 7);
}

TEST(ImageIo, RejectsAsciiMaxvalAndTruncation) {
  TempDir dir;
  write_text_file(dir / "p2.pgm", "P2\n2 1\n255\n0 1\n");
  EXPECT_THROW(load_image(dir / "p2.pgm"), FormatError);
  write_text_file(dir / "max.pgm", std::string("P5\n1 1\n65535\n") + char(0) + char(0));
  EXPECT_THROW(load_image(dir / "max.pgm"), FormatError);
  write_text_file(dir / "short.pgm", std::string("P5\n2 2\n255\n") + "abc");
  EXPECT_THROW(load_image(dir / "short.pgm"), FormatError);
}

TEST(ImageIo, RoundTrip) {
  TempDir dir;
  GrayImage img{3, 2, {1, 2, 3, 4, 5, 250}};
  save_image(img, dir / "x.pgm");
  const auto back = load_image(dir / "x.pgm");
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Manifest, OrderPreservedAndOptionalFields) {
  TempDir dir;
  save_image(GrayImage{1, 1, {0}}, dir / "l.pgm");
  write_text_file(dir / "m.tsv", "b\tl.pgm\t-\t-\na\tl.pgm\n# comment\nc\t-\n");
  const auto m = load_manifest(dir / "m.tsv");
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.entries[0].id, "b");
  EXPECT_EQ(m.entries[1].id, "a");
  EXPECT_EQ(m.entries[2].id, "c");
  ASSERT_TRUE(m.entries[0].layout.has_value());
  EXPECT_EQ(*m.entries[0].layout, dir / "l.pgm");
  EXPECT_FALSE(m.entries[0].prediction.has_value());
  EXPECT_FALSE(m.entries[2].layout.has_value());
}

TEST(Manifest, RejectsDuplicatesAndMissingFiles) {
  TempDir dir;
  save_image(GrayImage{1, 1, {0}}, dir / "l.pgm");
  write_text_file(dir / "dup.tsv", "a\tl.pgm\na\tl.pgm\n");
  EXPECT_THROW(load_manifest(dir / "dup.tsv"), FormatError);
  write_text_file(dir / "missing.tsv", "a\tnope.pgm\n");
  EXPECT_THROW(load_manifest(dir / "missing.tsv"), IoError);
}

TEST(ScoreReportIo, OneRowIsTwoLines) {
  TempDir dir;
  write_score_report(ScoreReport{{{"a", 1.0, 2.0, 3.0, true}}}, dir / "r.csv");
  EXPECT_EQ(read_text_file(dir / "r.csv"), "id,theta_local,theta_global,theta_novel,is_novel\na,1,2,3,true\n");
}

TEST(ScoreReportIo, EmptyReportIsHeaderOnly) {
  TempDir dir;
  write_score_report(ScoreReport{}, dir / "r.csv");
  EXPECT_EQ(read_text_file(dir / "r.csv"), "id,theta_local,theta_global,theta_novel,is_novel\n");
  EXPECT_TRUE(read_score_report(dir / "r.csv").rows.empty());
}

TEST(ScoreReportIo, RandomRoundTripWithin1e8) {
  TempDir dir;
  CounterRng rng{99};
  ScoreReport report;
  for (int i = 0; i < 100; ++i) {
    report.rows.push_back({"s" + std::to_string(i), rng.uniform(-10, 10), rng.uniform(-10, 10),
                           rng.uniform(-10, 10), rng.uniform() < 0.5});
  }
  write_score_report(report, dir / "r.csv");
  const auto back = read_score_report(dir / "r.csv");
  ASSERT_EQ(back.rows.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(back.rows[i].id, report.rows[i].id);
    EXPECT_NEAR(back.rows[i].theta_local, report.rows[i].theta_local, 1e-8);
    EXPECT_NEAR(back.rows[i].theta_global, report.rows[i].theta_global, 1e-8);
    EXPECT_NEAR(back.rows[i].theta_novel, report.rows[i].theta_novel, 1e-8);
    EXPECT_EQ(back.rows[i].is_novel, report.rows[i].is_novel);
  }
}

TEST(ScoreReportIo, UnwritablePathIsIoError) {
  EXPECT_THROW(write_score_report(ScoreReport{}, "/nonexistent-dir/r.csv"), IoError);
}
