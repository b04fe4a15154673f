#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "heightlab/geometry.hpp"
#include "heightlab/raster.hpp"

namespace heightlab {

/// Bird's-eye-view grid over the road plane. Row index grows with y
/// (longitudinal), column index with x (lateral).
struct BevGrid {
  int rows = 200;
  int cols = 48;
  double meters_per_pixel = 0.5;
  double x_min = -12.0;
  double y_min = 0.0;

  /// Throws InvalidArgument on non-positive sizes or resolution.
  void validate() const;

  std::size_t cell_count() const { return static_cast<std::size_t>(rows) * cols; }
  double x_max() const { return x_min + cols * meters_per_pixel; }
  double y_max() const { return y_min + rows * meters_per_pixel; }

  Vec2 cell_center(int r, int c) const {
    return {x_min + (c + 0.5) * meters_per_pixel, y_min + (r + 0.5) * meters_per_pixel};
  }

  /// Continuous (col, row) index of a road-plane point; cell centers map to
  /// integers.
  Vec2 continuous_index(double x, double y) const {
    return {(x - x_min) / meters_per_pixel - 0.5, (y - y_min) / meters_per_pixel - 0.5};
  }

  /// Cell containing (x, y), or false if outside the extent.
  bool locate(double x, double y, int& r, int& c) const;

  bool operator==(const BevGrid&) const = default;
};

/// Road height field over a BEV grid, in meters, with optional no-data cells.
class HeightMap {
 public:
  static constexpr double kSanityBound = 50.0;

  HeightMap() = default;
  /// All cells valid with the given fill value.
  explicit HeightMap(const BevGrid& grid, double fill = 0.0, RoadFrame frame = {});

  const BevGrid& grid() const { return grid_; }
  const RoadFrame& frame() const { return frame_; }
  void set_frame(const RoadFrame& frame) { frame_ = frame; }

  int rows() const { return grid_.rows; }
  int cols() const { return grid_.cols; }

  double at(int r, int c) const { return values_[index(r, c)]; }
  bool valid(int r, int c) const { return valid_[index(r, c)] != 0; }

  /// Sets a data cell. Throws InvalidArgument for non-finite values or
  /// |h| above the sanity bound.
  void set(int r, int c, double h);
  void set_nodata(int r, int c);

  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> validity() const { return valid_; }
  std::size_t valid_count() const;

 private:
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * grid_.cols + c; }

  BevGrid grid_;
  RoadFrame frame_;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

/// Planar slope hypotheses Anchor_a(X, Y) = slope_a * Y over a grid.
class SlopeAnchorSet {
 public:
  SlopeAnchorSet(const BevGrid& grid, std::vector<double> slopes);

  const BevGrid& grid() const { return grid_; }
  std::span<const double> slopes() const { return slopes_; }
  int size() const { return static_cast<int>(slopes_.size()); }

  /// Height of anchor a at cell (r, c).
  double height(int a, int r, int c) const {
    return anchors_[(static_cast<std::size_t>(a) * grid_.rows + r) * grid_.cols + c];
  }

 private:
  BevGrid grid_;
  std::vector<double> slopes_;
  std::vector<double> anchors_;  // A x rows x cols
};

/// Default grades: about -5, -2.5, 0, +2.5, +5 degrees.
std::vector<double> default_slopes();

/// Throws InvalidArgument for an empty, unsorted, or duplicated slope list.
SlopeAnchorSet make_anchor_set(const BevGrid& grid, std::span<const double> slopes);

using SurfaceFunction = std::function<double(double x, double y)>;

/// Samples h at every cell center; all cells valid.
HeightMap rasterize_surface(const BevGrid& grid, const SurfaceFunction& h, RoadFrame frame = {});

/// Bilinear sample of a height map at continuous (col, row). Invalid when
/// outside [0, cols-1] x [0, rows-1] or when any neighbour carrying weight
/// is a no-data cell.
Sample sample_bilinear(const HeightMap& map, double u, double v);

}  // namespace heightlab
