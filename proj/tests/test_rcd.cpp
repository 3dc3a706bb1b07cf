#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "cwish/baselines.hpp"
#include "cwish/errors.hpp"
#include "cwish/rcd.hpp"
#include "cwish/rng.hpp"

using namespace cwish;
namespace fs = std::filesystem;

namespace {

RgbImage noise_image(int w, int h, Rng& rng) {
  RgbImage img;
  img.width = w;
  img.height = h;
  img.data.resize(static_cast<std::size_t>(w) * h * 3);
  for (double& v : img.data) v = rng.uniform01();
  return img;
}

VoxelMask full_mask(int w, int h) {
  return VoxelMask{w, h, std::vector<std::uint8_t>(
                             static_cast<std::size_t>(w) * h, 1)};
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "cwish_rcd_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& bytes) {
  const fs::path path = scratch_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  return path;
}

}  // namespace

TEST_SUITE("rcd") {

TEST_CASE("feature extraction scans retained voxels in row-major order") {
  RgbImage img;
  img.width = 2;
  img.height = 2;
  // pixels (x,y): (0,0)=(.1,.2,.3) (1,0)=(.4,.5,.6) (0,1)=(.7,.8,.9) (1,1)=(1,0,.5)
  img.data = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.0, 0.5};
  const Eigen::MatrixXd full = extract_features(img, rgb_feature_map());
  REQUIRE(full.rows() == 4);
  REQUIRE(full.cols() == 3);
  CHECK(full(0, 0) == 0.1);
  CHECK(full(1, 2) == 0.6);
  CHECK(full(2, 1) == 0.8);
  CHECK(full(3, 0) == 1.0);

  VoxelMask mask = full_mask(2, 2);
  mask.keep[1] = 0;  // drop (1,0)
  const Eigen::MatrixXd masked = extract_features(img, rgb_feature_map(), &mask);
  REQUIRE(masked.rows() == 3);
  CHECK(masked(1, 0) == 0.7);  // the second retained voxel is (0,1)

  VoxelMask tiny = full_mask(2, 2);
  tiny.keep = {0, 0, 0, 1};
  CHECK_THROWS_AS(extract_features(img, rgb_feature_map(), &tiny),
                  MaskTooSmall);
  const VoxelMask wrong = full_mask(3, 2);
  CHECK_THROWS_AS(extract_features(img, rgb_feature_map(), &wrong),
                  DimensionMismatch);

  RgbImage bad = img;
  bad.data[0] = 1.5;
  CHECK_THROWS_AS(extract_features(bad, rgb_feature_map()), DomainError);
}

TEST_CASE("region covariance matches the direct estimator") {
  Rng rng(61);
  Eigen::MatrixXd x(40, 3);
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.gaussian();
  }
  const SpdMatrix got = region_covariance(x);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd want = centered.transpose() * centered / (x.rows() - 1);
  CHECK((got.mat() - want).norm() <= 1e-12);
}

TEST_CASE("region covariance jitters a rank-deficient estimate") {
  Eigen::MatrixXd two(2, 2);
  two << 0.0, 0.0, 1.0, 1.0;
  const SpdMatrix rcd = region_covariance(two);
  CHECK(rcd.mat()(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rcd.mat()(0, 1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rcd.mat()(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rcd.mat()(0, 0) > rcd.mat()(0, 1));  // the jitter landed on the diagonal
}

TEST_CASE("large i.i.d. samples give a near-identity covariance") {
  Rng rng(62);
  Eigen::MatrixXd x(100000, 3);
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.gaussian();
  }
  const SpdMatrix got = region_covariance(x);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(got.mat()(i, j) - (i == j ? 1.0 : 0.0)) < 0.02);
    }
  }
}

TEST_CASE("constant features are rejected rather than jittered") {
  Eigen::MatrixXd flat(5, 2);
  flat.setConstant(0.3);
  CHECK_THROWS_AS(region_covariance(flat), DegenerateFeatures);
  Eigen::MatrixXd one_row(1, 2);
  one_row << 0.1, 0.2;
  CHECK_THROWS_AS(region_covariance(one_row), DomainError);
}

TEST_CASE("pipeline normalizes the blue channel to unit variance") {
  Rng rng(63);
  const RgbImage img = noise_image(8, 6, rng);
  double blue_sd = 0.0;
  const SpdMatrix rcd = rcd_pipeline(img, nullptr, &blue_sd);
  REQUIRE(rcd.dim() == 3);
  CHECK(std::abs(rcd.mat()(2, 2) - 1.0) <= 1e-10);

  // recompute the blue spread directly from the image
  std::vector<double> blue;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) blue.push_back(img.at(x, y, 2));
  }
  double mean = 0.0;
  for (double b : blue) mean += b;
  mean /= static_cast<double>(blue.size());
  double var = 0.0;
  for (double b : blue) var += (b - mean) * (b - mean);
  var /= static_cast<double>(blue.size() - 1);
  CHECK(blue_sd == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("a blue channel equal to red collapses the normalized entries") {
  Rng rng(64);
  RgbImage img = noise_image(7, 7, rng);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      img.data[(static_cast<std::size_t>(y) * img.width + x) * 3 + 2] =
          img.at(x, y, 0);
    }
  }
  const SpdMatrix rcd = rcd_pipeline(img);
  CHECK(std::abs(rcd.mat()(0, 0) - 1.0) <= 1e-10);
  CHECK(std::abs(rcd.mat()(2, 2) - 1.0) <= 1e-10);
  CHECK(std::abs(rcd.mat()(0, 2) - 1.0) <= 1e-10);
}

TEST_CASE("pipeline output is invariant to global intensity scale") {
  Rng rng(65);
  const RgbImage img = noise_image(9, 5, rng);
  RgbImage dimmed = img;
  for (double& v : dimmed.data) v *= 0.25;
  const SpdMatrix a = rcd_pipeline(img);
  const SpdMatrix b = rcd_pipeline(dimmed);
  CHECK((a.mat() - b.mat()).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("constant blue channel is rejected") {
  Rng rng(66);
  RgbImage img = noise_image(6, 6, rng);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      img.data[(static_cast<std::size_t>(y) * img.width + x) * 3 + 2] = 0.5;
    }
  }
  CHECK_THROWS_AS(rcd_pipeline(img), ZeroBlueVariance);
}

TEST_CASE("masked-out voxels cannot influence the descriptor") {
  Rng rng(67);
  RgbImage img = noise_image(5, 5, rng);
  VoxelMask mask = full_mask(5, 5);
  mask.keep[6] = 0;   // voxel (1,1)
  mask.keep[18] = 0;  // voxel (3,3)
  const SpdMatrix before = rcd_pipeline(img, &mask);
  img.data[6 * 3 + 0] = 0.99;
  img.data[6 * 3 + 1] = 0.01;
  img.data[6 * 3 + 2] = 0.42;
  img.data[18 * 3 + 2] = 0.0;
  const SpdMatrix after = rcd_pipeline(img, &mask);
  CHECK((before.mat() - after.mat()).norm() == 0.0);
}

TEST_CASE("descriptors separate correlation-structured image classes") {
  Rng rng(68);
  const int w = 12, h = 12;
  const auto make_image = [&](bool coupled) {
    RgbImage img;
    img.width = w;
    img.height = h;
    img.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (int i = 0; i < w * h; ++i) {
      const double r = 0.2 + 0.6 * rng.uniform01();
      const double g = coupled ? std::clamp(r + 0.03 * rng.gaussian(), 0.0, 1.0)
                               : 0.2 + 0.6 * rng.uniform01();
      const double b = 0.2 + 0.6 * rng.uniform01();
      img.data[3 * i + 0] = r;
      img.data[3 * i + 1] = g;
      img.data[3 * i + 2] = b;
    }
    return img;
  };

  std::vector<SpdMatrix> descriptors;
  Partitioning truth;
  Eigen::MatrixXd sum_a = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd sum_b = Eigen::MatrixXd::Zero(3, 3);
  for (int cls = 0; cls < 2; ++cls) {
    for (int i = 0; i < 15; ++i) {
      const SpdMatrix rcd = rcd_pipeline(make_image(cls == 0));
      if (i < 5) {  // the first five per class act as a training split
        (cls == 0 ? sum_a : sum_b) += rcd.mat();
      } else {
        descriptors.push_back(rcd);
        truth.push_back(cls + 1);
      }
    }
  }
  const std::vector<SpdMatrix> means = {SpdMatrix(sum_a / 5.0),
                                        SpdMatrix(sum_b / 5.0)};
  const Partitioning got = log_euclidean_classify(descriptors, means);
  CHECK(rand_index(got, truth) > 0.9);
}

TEST_CASE("plain-text pixmaps parse with comments and spacing") {
  const fs::path path = write_file("plain.ppm",
                                   "P3\n"
                                   "# a comment line\n"
                                   "2 2\n255\n"
                                   "255 0 0   0 255 0\n"
                                   "0 0 255   255 # inline\n255 255\n");
  const RgbImage img = read_ppm(path.string());
  REQUIRE(img.width == 2);
  REQUIRE(img.height == 2);
  CHECK(img.at(0, 0, 0) == 1.0);
  CHECK(img.at(0, 0, 1) == 0.0);
  CHECK(img.at(1, 0, 1) == 1.0);
  CHECK(img.at(0, 1, 2) == 1.0);
  CHECK(img.at(1, 1, 0) == 1.0);
  CHECK(img.at(1, 1, 2) == 1.0);
}

TEST_CASE("binary pixmaps parse one- and two-byte samples") {
  std::string bytes = "P6\n2 1\n255\n";
  const unsigned char raw[6] = {0x00, 0x80, 0xFF, 0x40, 0x20, 0x10};
  bytes.append(reinterpret_cast<const char*>(raw), 6);
  const RgbImage img = read_ppm(write_file("raw8.ppm", bytes).string());
  REQUIRE(img.width == 2);
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(0, 0, 1) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK(img.at(0, 0, 2) == 1.0);
  CHECK(img.at(1, 0, 0) == doctest::Approx(64.0 / 255.0).epsilon(1e-15));

  std::string wide = "P6\n1 1\n65535\n";
  const unsigned char raw16[6] = {0x01, 0x00, 0xFF, 0xFF, 0x00, 0x01};
  wide.append(reinterpret_cast<const char*>(raw16), 6);
  const RgbImage deep = read_ppm(write_file("raw16.ppm", wide).string());
  CHECK(deep.at(0, 0, 0) == doctest::Approx(256.0 / 65535.0).epsilon(1e-15));
  CHECK(deep.at(0, 0, 1) == 1.0);
  CHECK(deep.at(0, 0, 2) == doctest::Approx(1.0 / 65535.0).epsilon(1e-15));
}

TEST_CASE("corrupt pixmaps are rejected") {
  CHECK_THROWS_AS(
      read_ppm(write_file("magic.ppm", "P5\n1 1\n255\n0").string()), IoError);
  CHECK_THROWS_AS(
      read_ppm(write_file("over.ppm", "P3\n1 1\n255\n300 0 0\n").string()),
      IoError);
  std::string trunc = "P6\n2 2\n255\n";
  trunc.append(5, '\0');
  CHECK_THROWS_AS(read_ppm(write_file("trunc.ppm", trunc).string()), IoError);
  CHECK_THROWS_AS(read_ppm((scratch_dir() / "missing.ppm").string()), IoError);
}

TEST_CASE("csv images and masks round through the grid header") {
  const fs::path img_path = write_file("img.csv",
                                       "2,2\n"
                                       "0.1,0.2,0.3,0.4,0.5,0.6\n"
                                       "0.7,0.8,0.9,1.0,0.0,0.5\n");
  const RgbImage img = read_image_csv(img_path.string());
  REQUIRE(img.width == 2);
  REQUIRE(img.height == 2);
  CHECK(img.at(1, 0, 2) == 0.6);
  CHECK(img.at(1, 1, 0) == 1.0);

  const fs::path mask_path = write_file("mask.csv", "2,2\n1,0\n1,1\n");
  const VoxelMask mask = read_mask_csv(mask_path.string());
  CHECK(mask.count() == 3);
  CHECK(!mask.at(1, 0));
  CHECK(mask.at(0, 1));

  CHECK_THROWS_AS(
      read_image_csv(write_file("short.csv", "2,2\n0.1,0.2,0.3\n").string()),
      IoError);
  CHECK_THROWS_AS(
      read_image_csv(
          write_file("range.csv", "1,1\n1.5,0.2,0.3\n").string()),
      IoError);
  CHECK_THROWS_AS(
      read_mask_csv(write_file("badhdr.csv", "two,2\n1,1\n").string()),
      IoError);
}

}  // TEST_SUITE
