#include "heightlab/heightgrid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "heightlab/error.hpp"

namespace heightlab {

// ---------------------------------------------------------------------------
// rasters

FeatureGrid::FeatureGrid(int rows, int cols, int channels, double fill)
    : rows_(rows), cols_(cols), channels_(channels) {
  if (rows <= 0 || cols <= 0 || channels <= 0) throw InvalidArgument("FeatureGrid: dimensions must be positive");
  data_.assign(static_cast<std::size_t>(rows) * cols * channels, fill);
}

std::size_t GroundMask::count() const {
  return static_cast<std::size_t>(std::count_if(mask_.begin(), mask_.end(), [](std::uint8_t m) { return m != 0; }));
}

BilinearStencil bilinear_stencil(int rows, int cols, double u, double v) {
  BilinearStencil s;
  s.c0 = std::min(static_cast<int>(std::floor(u)), std::max(cols - 2, 0));
  s.r0 = std::min(static_cast<int>(std::floor(v)), std::max(rows - 2, 0));
  s.fu = cols > 1 ? u - s.c0 : 0.0;
  s.fv = rows > 1 ? v - s.r0 : 0.0;
  return s;
}

bool sample_bilinear(const FeatureGrid& field, double u, double v, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (!(u >= 0.0 && u <= field.cols() - 1 && v >= 0.0 && v <= field.rows() - 1)) return false;

  const BilinearStencil s = bilinear_stencil(field.rows(), field.cols(), u, v);
  const int c1 = std::min(s.c0 + 1, field.cols() - 1);
  const int r1 = std::min(s.r0 + 1, field.rows() - 1);
  const double w00 = (1 - s.fu) * (1 - s.fv), w01 = s.fu * (1 - s.fv);
  const double w10 = (1 - s.fu) * s.fv, w11 = s.fu * s.fv;
  const auto p00 = field.cell(s.r0, s.c0), p01 = field.cell(s.r0, c1);
  const auto p10 = field.cell(r1, s.c0), p11 = field.cell(r1, c1);
  for (std::size_t ch = 0; ch < out.size(); ++ch) {
    out[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
  }
  return true;
}

Sample sample_bilinear(const FeatureGrid& field, double u, double v) {
  double value = 0.0;
  const bool ok = sample_bilinear(field, u, v, std::span<double>(&value, 1));
  return {value, ok};
}

// ---------------------------------------------------------------------------
// BEV grid and height maps

void BevGrid::validate() const {
  if (rows <= 0 || cols <= 0) throw InvalidArgument("BevGrid: rows and cols must be positive");
  if (!(meters_per_pixel > 0.0)) throw InvalidArgument("BevGrid: meters_per_pixel must be positive");
  if (!std::isfinite(x_min) || !std::isfinite(y_min)) throw InvalidArgument("BevGrid: non-finite origin");
}

bool BevGrid::locate(double x, double y, int& r, int& c) const {
  const double fc = std::floor((x - x_min) / meters_per_pixel);
  const double fr = std::floor((y - y_min) / meters_per_pixel);
  if (!(fc >= 0 && fc < cols && fr >= 0 && fr < rows)) return false;
  c = static_cast<int>(fc);
  r = static_cast<int>(fr);
  return true;
}

HeightMap::HeightMap(const BevGrid& grid, double fill, RoadFrame frame)
    : grid_(grid), frame_(frame), values_(grid.cell_count(), fill), valid_(grid.cell_count(), 1) {
  grid_.validate();
}

void HeightMap::set(int r, int c, double h) {
  if (!std::isfinite(h) || std::abs(h) > kSanityBound) {
    throw InvalidArgument("HeightMap: height must be finite and within the sanity bound");
  }
  values_[index(r, c)] = h;
  valid_[index(r, c)] = 1;
}

void HeightMap::set_nodata(int r, int c) {
  values_[index(r, c)] = 0.0;
  valid_[index(r, c)] = 0;
}

std::size_t HeightMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

Sample sample_bilinear(const HeightMap& map, double u, double v) {
  if (!(u >= 0.0 && u <= map.cols() - 1 && v >= 0.0 && v <= map.rows() - 1)) return {};
  const BilinearStencil s = bilinear_stencil(map.rows(), map.cols(), u, v);
  const int c1 = std::min(s.c0 + 1, map.cols() - 1);
  const int r1 = std::min(s.r0 + 1, map.rows() - 1);
  const int rr[4] = {s.r0, s.r0, r1, r1};
  const int cc[4] = {s.c0, c1, s.c0, c1};
  const double w[4] = {(1 - s.fu) * (1 - s.fv), s.fu * (1 - s.fv), (1 - s.fu) * s.fv, s.fu * s.fv};
  double value = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0) continue;
    if (!map.valid(rr[k], cc[k])) return {};
    value += w[k] * map.at(rr[k], cc[k]);
  }
  return {value, true};
}

// ---------------------------------------------------------------------------
// anchors

SlopeAnchorSet::SlopeAnchorSet(const BevGrid& grid, std::vector<double> slopes)
    : grid_(grid), slopes_(std::move(slopes)) {
  grid_.validate();
  if (slopes_.empty()) throw InvalidArgument("SlopeAnchorSet: at least one slope is required");
  for (std::size_t i = 0; i < slopes_.size(); ++i) {
    if (!std::isfinite(slopes_[i])) throw InvalidArgument("SlopeAnchorSet: non-finite slope");
    if (i > 0 && !(slopes_[i] > slopes_[i - 1])) {
      throw InvalidArgument("SlopeAnchorSet: slopes must be strictly increasing");
    }
  }
  anchors_.resize(slopes_.size() * grid_.cell_count());
  for (std::size_t a = 0; a < slopes_.size(); ++a) {
    for (int r = 0; r < grid_.rows; ++r) {
      const double y = grid_.cell_center(r, 0).y();
      for (int c = 0; c < grid_.cols; ++c) {
        anchors_[(a * grid_.rows + r) * grid_.cols + c] = slopes_[a] * y;
      }
    }
  }
}

std::vector<double> default_slopes() { return {-0.087, -0.044, 0.0, 0.044, 0.087}; }

SlopeAnchorSet make_anchor_set(const BevGrid& grid, std::span<const double> slopes) {
  return SlopeAnchorSet(grid, std::vector<double>(slopes.begin(), slopes.end()));
}

HeightMap rasterize_surface(const BevGrid& grid, const SurfaceFunction& h, RoadFrame frame) {
  HeightMap map(grid, 0.0, frame);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Vec2 p = grid.cell_center(r, c);
      map.set(r, c, h(p.x(), p.y()));
    }
  }
  return map;
}

}  // namespace heightlab
