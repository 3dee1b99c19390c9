#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "cli/fixtures.hpp"
#include "crfconv/cloud.hpp"
#include "crfconv/text.hpp"

using namespace crfconv;

namespace {

std::size_t parse_error_line(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no ParseError raised";
  return 0;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "crfconv_io_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(CsvCloud, PositionsOnly) {
  const auto c = parse_csv_cloud("0,0,0\n1,0,0\n0,1,0\n");
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.feature_dim(), 0u);
  EXPECT_EQ(c.positions()(2, 1), 1.0);
}

TEST(CsvCloud, FeaturesAndBlankLines) {
  const auto c = parse_csv_cloud("0,0,0,5,6\r\n\n1,2,3,7,8\n");
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.feature_dim(), 2u);
  EXPECT_EQ(c.features()(1, 1), 8.0);
}

TEST(CsvCloud, ErrorsNameTheLine) {
  EXPECT_EQ(parse_error_line([] { parse_csv_cloud("1,2\n"); }), 1u);
  EXPECT_EQ(parse_error_line([] { parse_csv_cloud("0,0,0\n1,1,1,1\n"); }), 2u);
  EXPECT_EQ(parse_error_line([] { parse_csv_cloud("0,0,0\n\n1,x,1\n"); }), 3u);
  EXPECT_EQ(parse_error_line([] { parse_csv_cloud("0,0,nan\n"); }), 1u);
}

TEST(PlyCloud, ColorPropertiesBecomeFeatures) {
  const std::string text =
      "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "0 0 0 255 0 0\n1 2 3 0 128 255\n3 0 1 1\n";
  const auto c = parse_ply_cloud(text);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.feature_dim(), 3u);
  EXPECT_EQ(c.positions()(1, 2), 3.0);
  EXPECT_EQ(c.features()(1, 2), 255.0);
}

TEST(PlyCloud, CoordinatesInAnyColumn) {
  const std::string text =
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float nx\nproperty float z\n"
      "property float x\nproperty float y\nend_header\n9 3 1 2\n";
  const auto c = parse_ply_cloud(text);
  EXPECT_EQ(c.position(0), Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(c.features()(0, 0), 9.0);
}

TEST(PlyCloud, RejectsBinaryAndBrokenHeaders) {
  EXPECT_EQ(parse_error_line([] {
              parse_ply_cloud("ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n");
            }),
            2u);
  EXPECT_EQ(parse_error_line([] { parse_ply_cloud("plx\n"); }), 1u);
  EXPECT_EQ(parse_error_line([] {
              parse_ply_cloud("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                              "property float z\nend_header\n1 2\n");
            }),
            8u);
  EXPECT_THROW(parse_ply_cloud("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n"),
               ParseError);
}

TEST(CloudFiles, RoundTripBothFormats) {
  std::mt19937_64 rng(2);
  const auto cloud = cli::random_cloud(7, 6, rng);
  for (auto fmt : {CloudFormat::CsvXyz, CloudFormat::PlyAscii}) {
    const auto path = scratch(fmt == CloudFormat::CsvXyz ? "rt.csv" : "rt.ply");
    write_cloud(cloud, path, fmt);
    const auto back = read_cloud(path, fmt);
    EXPECT_EQ(back.positions(), cloud.positions());
    EXPECT_EQ(back.features(), cloud.features());
  }
}

TEST(CloudFiles, WideFeatureRowsHaveAllColumns) {
  std::mt19937_64 rng(4);
  const auto text = format_csv_cloud(cli::random_cloud(3, 6, rng));
  const auto first = text.substr(0, text.find('\n'));
  EXPECT_EQ(std::count(first.begin(), first.end(), ','), 8);
}

TEST(CloudFiles, EmptyCloudRoundTrips) {
  for (auto fmt : {CloudFormat::CsvXyz, CloudFormat::PlyAscii}) {
    const auto path = scratch(fmt == CloudFormat::CsvXyz ? "empty.csv" : "empty.ply");
    write_cloud(PointCloud{}, path, fmt);
    EXPECT_EQ(read_cloud(path, fmt).size(), 0u);
  }
}

TEST(CloudFiles, MissingFileThrows) {
  EXPECT_THROW(read_cloud("/nonexistent/dir/cloud.csv", CloudFormat::CsvXyz), std::runtime_error);
}

TEST(CloudFormat, NamesAndExtensions) {
  EXPECT_EQ(parse_cloud_format("ply"), CloudFormat::PlyAscii);
  EXPECT_EQ(parse_cloud_format("csv-xyz"), CloudFormat::CsvXyz);
  EXPECT_THROW(parse_cloud_format("las"), std::invalid_argument);
  EXPECT_EQ(cloud_format_from_path("a/b.PLY"), CloudFormat::PlyAscii);
  EXPECT_EQ(cloud_format_from_path("a/b.txt"), CloudFormat::CsvXyz);
}

TEST(NumberFormat, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(parse_number(format_number(v), 1), v);
}
