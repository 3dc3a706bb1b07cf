#pragma once
#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "cwish/spd.hpp"

namespace cwish {

/// RGB image: width x height pixels, three channels, intensities in [0, 1].
/// Storage is row-major by pixel, channel-interleaved:
/// data[(y * width + x) * 3 + c] with c in {0=R, 1=G, 2=B}.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  /// Throws DimensionMismatch when the buffer size disagrees with
  /// width*height*3, DomainError when any intensity is non-finite or
  /// outside [0, 1].
  void validate() const;
};

/// Boolean voxel mask over an image grid. keep[y * width + x] selects the
/// voxels that enter the descriptor.
struct VoxelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> keep;

  bool at(int x, int y) const {
    return keep[static_cast<std::size_t>(y) * width + x] != 0;
  }
  int count() const;
};

/// One named per-voxel feature function.
struct Feature {
  std::string name;
  std::function<double(int x, int y, const RgbImage&)> fn;
};

/// Ordered list of per-voxel feature functions; output dimension = size().
struct FeatureMap {
  std::vector<Feature> features;

  int dim() const { return static_cast<int>(features.size()); }
};

/// The default feature map: raw (R, G, B) magnitudes.
FeatureMap rgb_feature_map();

/// Evaluate the feature map at every retained voxel (all voxels when mask is
/// null). Rows follow row-major voxel order (y outer, x inner). Throws
/// DimensionMismatch when the mask grid disagrees with the image,
/// DomainError for an empty feature map or invalid image, and MaskTooSmall
/// when fewer than 2 voxels are retained.
Eigen::MatrixXd extract_features(const RgbImage& img, const FeatureMap& fmap,
                                 const VoxelMask* mask = nullptr);

/// Sample covariance of the feature rows with divisor n-1, symmetrized.
/// When the positive-definiteness check fails, 1e-12 * I is added once; if
/// the matrix is still not usable as a descriptor — all features constant
/// (zero covariance) or the jittered matrix still fails the check — throws
/// DegenerateFeatures. Throws DomainError when n < 2.
SpdMatrix region_covariance(const Eigen::MatrixXd& features);

/// Full descriptor pipeline: extract (R, G, B) over the mask, divide all
/// three channels by the sample standard deviation of the masked blue
/// magnitudes, then take the region covariance. The (3,3) entry of the
/// result equals 1 up to rounding, and the output is invariant to scaling
/// all channels by a common positive constant. Throws ZeroBlueVariance when
/// the blue spread is <= 1e-8. When `blue_sd_out` is non-null it receives
/// the normalizing standard deviation.
SpdMatrix rcd_pipeline(const RgbImage& img, const VoxelMask* mask = nullptr,
                       double* blue_sd_out = nullptr);

/// Read a portable pixmap: plain (P3) or raw (P6), maxval up to 65535.
/// Intensities are scaled to [0, 1] by maxval. Throws IoError on read or
/// format failure.
RgbImage read_ppm(const std::string& path);

/// Read an image from CSV: line 1 is "width,height"; then height lines each
/// holding 3*width values, pixels left to right as R,G,B triples.
RgbImage read_image_csv(const std::string& path);

/// Read a mask from CSV: line 1 is "width,height"; then height lines of
/// width values, nonzero meaning retained.
VoxelMask read_mask_csv(const std::string& path);

}  // namespace cwish
