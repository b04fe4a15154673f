#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace heightlab {

/// Dense rows x cols x channels raster of doubles, channel-interleaved.
/// Stands in for image features, BEV features, depth and footprint rasters.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int rows, int cols, int channels, double fill = 0.0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  double& at(int r, int c, int ch = 0) { return data_[index(r, c, ch)]; }
  double at(int r, int c, int ch = 0) const { return data_[index(r, c, ch)]; }

  std::span<double> cell(int r, int c) { return {data_.data() + index(r, c, 0), static_cast<std::size_t>(channels_)}; }
  std::span<const double> cell(int r, int c) const {
    return {data_.data() + index(r, c, 0), static_cast<std::size_t>(channels_)};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const FeatureGrid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && channels_ == other.channels_;
  }

 private:
  std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(r) * cols_ + c) * channels_ + ch;
  }

  int rows_ = 0;
  int cols_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Binary image-space ground labelling (1 = ground).
class GroundMask {
 public:
  GroundMask() = default;
  GroundMask(int rows, int cols) : rows_(rows), cols_(cols), mask_(static_cast<std::size_t>(rows) * cols, 0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::uint8_t& at(int r, int c) { return mask_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::uint8_t at(int r, int c) const { return mask_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::span<std::uint8_t> data() { return mask_; }
  std::span<const std::uint8_t> data() const { return mask_; }
  std::size_t count() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> mask_;
};

/// Bilinear sample of a raster at continuous column u and row v. Writes the
/// interpolated channels into out (size = channels) and returns true when
/// (u, v) lies in [0, cols-1] x [0, rows-1]; otherwise writes zeros and
/// returns false.
bool sample_bilinear(const FeatureGrid& field, double u, double v, std::span<double> out);

/// Scalar convenience overload for single-channel rasters.
struct Sample {
  double value = 0.0;
  bool valid = false;
};
Sample sample_bilinear(const FeatureGrid& field, double u, double v);

/// Bilinear stencil: the four neighbour indices (clamped into the raster)
/// and their weights. Shared by sampling and splatting code paths.
struct BilinearStencil {
  int r0 = 0, c0 = 0;  // top-left neighbour; (r0+1, c0+1) may equal the edge
  double fu = 0.0;     // fractional column offset in [0, 1]
  double fv = 0.0;     // fractional row offset in [0, 1]
};

/// Stencil for a point inside [0, cols-1] x [0, rows-1]. For points on the
/// last row/column the top-left neighbour is moved inward so that the
/// fractional offset becomes 1.
BilinearStencil bilinear_stencil(int rows, int cols, double u, double v);

}  // namespace heightlab
