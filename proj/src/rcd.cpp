#include "cwish/rcd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cwish/errors.hpp"

namespace cwish {

namespace {

constexpr double kJitter = 1e-12;
constexpr double kBlueFloor = 1e-8;
// Diagonal of a covariance of genuinely varying features cannot sit at the
// square of machine epsilon; at or below this every feature is constant.
constexpr double kConstantVariance = 1e-24;

double parse_double(const std::string& token, const std::string& path) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw IoError(path + ": expected a number, got '" + token + "'");
  }
  if (used != token.size()) {
    throw IoError(path + ": trailing characters in '" + token + "'");
  }
  return value;
}

std::vector<double> split_csv_line(const std::string& line,
                                   const std::string& path) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto first = token.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      throw IoError(path + ": empty CSV field");
    }
    const auto last = token.find_last_not_of(" \t\r");
    values.push_back(parse_double(token.substr(first, last - first + 1), path));
  }
  return values;
}

std::string next_line(std::istream& in, const std::string& path) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return line;
  }
  throw IoError(path + ": unexpected end of file");
}

std::pair<int, int> parse_grid_header(const std::string& line,
                                      const std::string& path) {
  const std::vector<double> header = split_csv_line(line, path);
  if (header.size() != 2) {
    throw IoError(path + ": header must be 'width,height'");
  }
  const int w = static_cast<int>(header[0]);
  const int h = static_cast<int>(header[1]);
  if (w < 1 || h < 1 || w != header[0] || h != header[1]) {
    throw IoError(path + ": width and height must be positive integers");
  }
  return {w, h};
}

/// PPM token reader: whitespace-separated tokens with '#' comments running
/// to end of line.
std::string ppm_token(std::istream& in, const std::string& path) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF) throw IoError(path + ": unexpected end of file");
  while (c != EOF && !std::isspace(c) && c != '#') {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  // leave the terminator in the stream: raw pixel data must start exactly
  // one whitespace byte after the maxval token
  if (c != EOF) in.unget();
  return token;
}

int ppm_int(std::istream& in, const std::string& path) {
  const std::string token = ppm_token(in, path);
  for (char ch : token) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) {
      throw IoError(path + ": expected an integer, got '" + token + "'");
    }
  }
  if (token.empty() || token.size() > 9) {
    throw IoError(path + ": malformed integer '" + token + "'");
  }
  return std::stoi(token);
}

}  // namespace

void RgbImage::validate() const {
  if (width < 1 || height < 1) {
    throw DomainError("RgbImage: width and height must be positive");
  }
  const std::size_t expected =
      static_cast<std::size_t>(width) * height * 3;
  if (data.size() != expected) {
    throw DimensionMismatch("RgbImage: buffer size does not match W*H*3");
  }
  for (double v : data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw DomainError("RgbImage: intensities must be finite and in [0,1]");
    }
  }
}

int VoxelMask::count() const {
  int n = 0;
  for (std::uint8_t k : keep) n += (k != 0);
  return n;
}

FeatureMap rgb_feature_map() {
  FeatureMap fmap;
  fmap.features.push_back(
      {"R", [](int x, int y, const RgbImage& img) { return img.at(x, y, 0); }});
  fmap.features.push_back(
      {"G", [](int x, int y, const RgbImage& img) { return img.at(x, y, 1); }});
  fmap.features.push_back(
      {"B", [](int x, int y, const RgbImage& img) { return img.at(x, y, 2); }});
  return fmap;
}

Eigen::MatrixXd extract_features(const RgbImage& img, const FeatureMap& fmap,
                                 const VoxelMask* mask) {
  img.validate();
  if (fmap.dim() < 1) {
    throw DomainError("extract_features: feature map is empty");
  }
  if (mask != nullptr) {
    if (mask->width != img.width || mask->height != img.height) {
      throw DimensionMismatch("extract_features: mask grid does not match image");
    }
  }
  const int n = mask != nullptr ? mask->count() : img.width * img.height;
  if (n < 2) {
    throw MaskTooSmall("extract_features: need at least 2 retained voxels");
  }
  Eigen::MatrixXd features(n, fmap.dim());
  int row = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (mask != nullptr && !mask->at(x, y)) continue;
      for (int d = 0; d < fmap.dim(); ++d) {
        features(row, d) = fmap.features[d].fn(x, y, img);
      }
      ++row;
    }
  }
  return features;
}

SpdMatrix region_covariance(const Eigen::MatrixXd& features) {
  const int n = static_cast<int>(features.rows());
  if (n < 2) {
    throw DomainError("region_covariance: need at least 2 feature rows");
  }
  const Eigen::RowVectorXd mean = features.colwise().mean();
  const Eigen::MatrixXd centered = features.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (cov.diagonal().maxCoeff() <= kConstantVariance) {
    throw DegenerateFeatures(
        "region_covariance: all features constant (zero covariance)");
  }
  try {
    return SpdMatrix(cov);
  } catch (const NotPositiveDefinite&) {
    cov.diagonal().array() += kJitter;
    try {
      return SpdMatrix(cov);
    } catch (const NotPositiveDefinite&) {
      throw DegenerateFeatures(
          "region_covariance: rank deficiency persists after jitter");
    }
  }
}

SpdMatrix rcd_pipeline(const RgbImage& img, const VoxelMask* mask,
                       double* blue_sd_out) {
  Eigen::MatrixXd features = extract_features(img, rgb_feature_map(), mask);
  const int n = static_cast<int>(features.rows());
  const Eigen::VectorXd blue = features.col(2);
  const double blue_mean = blue.mean();
  const double blue_var =
      (blue.array() - blue_mean).square().sum() / (n - 1);
  const double blue_sd = std::sqrt(blue_var);
  if (!(blue_sd > kBlueFloor)) {
    throw ZeroBlueVariance(
        "rcd_pipeline: blue-channel spread <= 1e-8; normalization undefined");
  }
  if (blue_sd_out != nullptr) *blue_sd_out = blue_sd;
  features /= blue_sd;
  return region_covariance(features);
}

RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  const std::string magic = ppm_token(in, path);
  if (magic != "P3" && magic != "P6") {
    throw IoError(path + ": not a P3/P6 portable pixmap");
  }
  const int width = ppm_int(in, path);
  const int height = ppm_int(in, path);
  const int maxval = ppm_int(in, path);
  if (width < 1 || height < 1) {
    throw IoError(path + ": width and height must be positive");
  }
  if (maxval < 1 || maxval > 65535) {
    throw IoError(path + ": maxval must lie in [1, 65535]");
  }
  RgbImage img;
  img.width = width;
  img.height = height;
  img.data.resize(static_cast<std::size_t>(width) * height * 3);
  const std::size_t n_samples = img.data.size();
  if (magic == "P3") {
    for (std::size_t i = 0; i < n_samples; ++i) {
      const int v = ppm_int(in, path);
      if (v > maxval) throw IoError(path + ": sample exceeds maxval");
      img.data[i] = static_cast<double>(v) / maxval;
    }
  } else {
    // Raw samples follow a single whitespace byte after maxval.
    const int sep = in.get();
    if (sep == EOF || !std::isspace(sep)) {
      throw IoError(path + ": missing separator after maxval");
    }
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n_samples * bytes);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
      throw IoError(path + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < n_samples; ++i) {
      const int v = bytes == 1
                        ? raw[i]
                        : (raw[2 * i] << 8) | raw[2 * i + 1];
      if (v > maxval) throw IoError(path + ": sample exceeds maxval");
      img.data[i] = static_cast<double>(v) / maxval;
    }
  }
  img.validate();
  return img;
}

RgbImage read_image_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  const auto [width, height] = parse_grid_header(next_line(in, path), path);
  RgbImage img;
  img.width = width;
  img.height = height;
  img.data.reserve(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y) {
    const std::vector<double> row = split_csv_line(next_line(in, path), path);
    if (static_cast<int>(row.size()) != 3 * width) {
      throw IoError(path + ": image row must hold 3*width values");
    }
    img.data.insert(img.data.end(), row.begin(), row.end());
  }
  try {
    img.validate();
  } catch (const Error& e) {
    throw IoError(path + ": " + e.what());
  }
  return img;
}

VoxelMask read_mask_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  const auto [width, height] = parse_grid_header(next_line(in, path), path);
  VoxelMask mask;
  mask.width = width;
  mask.height = height;
  mask.keep.reserve(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const std::vector<double> row = split_csv_line(next_line(in, path), path);
    if (static_cast<int>(row.size()) != width) {
      throw IoError(path + ": mask row must hold width values");
    }
    for (double v : row) mask.keep.push_back(v != 0.0 ? 1 : 0);
  }
  return mask;
}

}  // namespace cwish
