#pragma once

// Independent reference implementations used as test oracles. They are
// written as plain loops with long double accumulation and share no code
// with the library beyond its container types.

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "heightlab/geometry.hpp"
#include "heightlab/heightgrid.hpp"
#include "heightlab/raster.hpp"

namespace heightlab_test {

using heightlab::BevGrid;
using heightlab::FeatureGrid;
using heightlab::HeightMap;

struct BruteReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::vector<double> acc;  // same order as the thresholds passed in
  std::size_t n = 0;
};

/// Metrics by direct iteration over all cells.
BruteReport brute_metrics(const HeightMap& pred, const HeightMap& gt, const std::vector<double>& thresholds);

/// Naive softmax without max subtraction (long double).
std::vector<double> naive_softmax(const std::vector<double>& logits);

/// Bilinear interpolation written from the textbook formula.
double textbook_bilinear(const std::function<double(int, int)>& value, double u, double v);

/// 4x4 homogeneous matrix built from rotation and translation entries.
Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

/// Rotation about an axis by Rodrigues' formula.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle);

/// Pinhole projection from the closed-form formula.
Eigen::Vector2d pinhole(double fx, double fy, double cx, double cy, const Eigen::Vector3d& p_cam);

/// Random map: values uniform in [lo, hi), each cell no-data with the given
/// probability.
HeightMap random_map(const BevGrid& grid, std::mt19937_64& rng, double lo, double hi, double nodata_prob = 0.0);

/// Random proper rotation and translation.
heightlab::RigidTransform random_transform(std::mt19937_64& rng, double max_translation = 5.0);

/// Central finite difference of f along one coordinate.
double central_difference(const std::function<double(double)>& f, double x, double step);

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Byte contents of a file.
std::string slurp(const std::filesystem::path& path);

/// Directory of checked-in golden files.
std::filesystem::path golden_dir();

}  // namespace heightlab_test
