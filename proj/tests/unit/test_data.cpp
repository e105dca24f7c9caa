#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "lyanet/data.hpp"
#include "lyanet/error.hpp"

using namespace lyanet;
using namespace lyanet::data;

TEST(Circles, NoiselessPointsSitOnTheirRing) {
  const auto d = gen_circles(200, 1.0, 2.0, 0.0, 3);
  ASSERT_EQ(d.size(), 200u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = std::hypot(d.inputs[i][0], d.inputs[i][1]);
    EXPECT_NEAR(r, d.labels[i] == 0 ? 1.0 : 2.0, 1e-12);
  }
}

TEST(Circles, BalancedLabels) {
  for (std::size_t n : {2u, 7u, 1000u}) {
    const auto d = gen_circles(n, 1.0, 2.0, 0.1, 1);
    long zeros = 0;
    for (auto y : d.labels) zeros += y == 0;
    EXPECT_LE(std::labs(zeros - static_cast<long>(n - zeros)), 1);
    EXPECT_EQ(d.classes, 2u);
    EXPECT_EQ(d.input_dim, 2u);
  }
}

TEST(Circles, RadialStdMatchesNoise) {
  const auto d = gen_circles(1000, 1.0, 2.0, 0.05, 11);
  for (std::size_t ring = 0; ring < 2; ++ring) {
    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] != ring) continue;
      const double dev = std::hypot(d.inputs[i][0], d.inputs[i][1]) - (ring == 0 ? 1.0 : 2.0);
      sum += dev;
      sq += dev * dev;
      ++n;
    }
    const double std_dev = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_NEAR(std_dev, 0.05, 0.15 * 0.05);
  }
}

TEST(Circles, DeterministicAndValidated) {
  const auto a = gen_circles(50, 1.0, 2.0, 0.1, 9);
  const auto b = gen_circles(50, 1.0, 2.0, 0.1, 9);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_NO_THROW(a.validate());
  EXPECT_THROW(gen_circles(1, 1.0, 2.0, 0.1, 0), ContractViolation);
  EXPECT_THROW(gen_circles(10, 2.0, 1.0, 0.1, 0), ContractViolation);
  EXPECT_THROW(gen_circles(10, 1.0, 2.0, -0.1, 0), ContractViolation);
}

TEST(Blobs, NoiselessPointsEqualCenters) {
  const std::vector<std::vector<double>> centers{{-3.0, 1.0}, {2.0, 2.0}, {0.0, -4.0}};
  const auto d = gen_blobs(30, centers, 0.0, 5);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.inputs[i], centers[d.labels[i]]);
  EXPECT_EQ(d.classes, 3u);
}

TEST(Blobs, ClassMeansNearCenters) {
  const std::vector<std::vector<double>> centers{{-3.0, 1.0}, {2.0, 2.0}};
  const double sigma = 0.5;
  const std::size_t count = 4000;
  const auto d = gen_blobs(count, centers, sigma, 6);
  for (std::size_t c = 0; c < 2; ++c) {
    double mx = 0.0, my = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] != c) continue;
      mx += d.inputs[i][0];
      my += d.inputs[i][1];
      ++n;
    }
    const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(mx / n, centers[c][0], tol);
    EXPECT_NEAR(my / n, centers[c][1], tol);
  }
}

TEST(Grid, UnitSquareCorners) {
  const auto g = grid({AxisBounds{0.0, 1.0}, AxisBounds{0.0, 1.0}}, 2);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g[0], (std::array<double, 2>{0.0, 0.0}));
  EXPECT_EQ(g[1], (std::array<double, 2>{1.0, 0.0}));
  EXPECT_EQ(g[2], (std::array<double, 2>{0.0, 1.0}));
  EXPECT_EQ(g[3], (std::array<double, 2>{1.0, 1.0}));
}

TEST(Grid, SizeAndUniformSpacing) {
  const auto g = grid({AxisBounds{-2.0, 3.0}, AxisBounds{1.0, 4.0}}, 17);
  ASSERT_EQ(g.size(), 17u * 17u);
  const double step = g[1][0] - g[0][0];
  for (std::size_t j = 1; j < 17; ++j) EXPECT_NEAR(g[j][0] - g[j - 1][0], step, 1e-12);
  EXPECT_EQ(g.back()[0], 3.0);
  EXPECT_EQ(g.back()[1], 4.0);
  EXPECT_THROW(grid({AxisBounds{0, 1}, AxisBounds{0, 1}}, 1), ContractViolation);
}

TEST(Csv, RoundTripIsExact) {
  const auto d = gen_circles(25, 1.0, 2.0, 0.3, 4);
  std::stringstream buf;
  write_csv(buf, d);
  const auto r = read_csv(buf);
  EXPECT_EQ(r.inputs, d.inputs);
  EXPECT_EQ(r.labels, d.labels);
  EXPECT_EQ(r.input_dim, 2u);
}

TEST(Csv, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "lyanet_test_data_roundtrip.csv";
  const auto d = gen_blobs(12, {{0.0, 1.0, 2.0}, {3.0, 4.0, 5.0}}, 0.7, 2);
  save_csv(d, path);
  const auto r = load_csv(path);
  EXPECT_EQ(r.inputs, d.inputs);
  EXPECT_EQ(r.labels, d.labels);
  std::filesystem::remove(path);
}

TEST(Csv, HeaderMismatchNamesExpectedHeader) {
  std::stringstream in("a,b,label\n1,2,0\n");
  try {
    read_csv(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("x_0,x_1,label"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Csv, MalformedRowReportsLine) {
  std::stringstream in("x_0,x_1,label\n1,2,0\n1,oops,1\n");
  try {
    read_csv(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::stringstream short_row("x_0,x_1,label\n1,0\n");
  EXPECT_THROW(read_csv(short_row), ParseError);
}

TEST(Csv, DocsFixtureHasFourPoints) {
  const auto d = load_csv(std::filesystem::path(LYANET_SOURCE_DIR) / "docs" / "fixtures" / "sample_n2_m2.csv");
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d.input_dim, 2u);
  EXPECT_EQ(d.classes, 2u);
  EXPECT_EQ(d.inputs[0], (std::vector<double>{0.5, -0.25}));
  EXPECT_EQ(d.labels, (std::vector<std::size_t>{0, 0, 1, 1}));
}

TEST(Dataset, ValidateCatchesBadRows) {
  LabeledDataset d{{{1.0, 2.0}}, {3}, 2, 2, "test"};
  EXPECT_THROW(d.validate(), ContractViolation);
  LabeledDataset e{{{1.0, NAN}}, {0}, 2, 2, "test"};
  EXPECT_THROW(e.validate(), ContractViolation);
}
