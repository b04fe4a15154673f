#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "heightlab/geometry.hpp"
#include "heightlab/heightgrid.hpp"

namespace heightlab {

/// T_{t-1}^{t} = road_from_ego(t) * ego(t)_from_ego(t-1) * ego_from_road(t-1).
RigidTransform relative_transform(const RoadFrame& frame_prev, const RoadFrame& frame_curr,
                                  const RigidTransform& ego_motion);

/// Cells of the target grid whose warped source is usable.
struct OverlapMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> mask;

  bool at(int r, int c) const { return mask[static_cast<std::size_t>(r) * cols + c] != 0; }
  std::size_t count() const;
};

/// Precomputed gather stencil of a warp. For each target cell: the four
/// bilinear source cells with their weights, plus the affine height map
/// h' = z_gain * h_source + z_offset contributed by the transform.
struct WarpStencil {
  struct Entry {
    std::array<std::int32_t, 4> source{};  // flattened source cell indices
    std::array<double, 4> weight{};
    double z_offset = 0.0;
    bool in_domain = false;  // source lies in [0, cols-1] x [0, rows-1]
  };

  BevGrid source_grid;
  BevGrid target_grid;
  double z_gain = 1.0;
  std::vector<Entry> entries;  // one per target cell
};

/// Maximum plane tilt accepted by the warp.
inline constexpr double kMaxWarpTiltRadians = 0.7853981633974483;  // 45 degrees

/// Builds the gather stencil for t_rel (road(t-1) -> road(t)). Each target
/// cell center is mapped through t_rel^-1 at zero height and its planar part
/// is used as the source location. Throws NumericalError when t_rel tilts
/// the plane by 45 degrees or more.
WarpStencil build_warp_stencil(const BevGrid& source_grid, const RigidTransform& t_rel, const BevGrid& target_grid);

struct WarpResult {
  HeightMap warped;
  OverlapMask overlap;
};

/// Applies a stencil. A target cell is set in the overlap mask iff its source
/// is in the domain and every source cell carrying weight holds data.
WarpResult apply_warp(const WarpStencil& stencil, const HeightMap& h_prev);

/// Inverse (gather) warp of the previous height map into the target grid.
WarpResult warp_heightmap(const HeightMap& h_prev, const RigidTransform& t_rel, const BevGrid& target_grid);

/// Mean |h_warped - h_curr| over overlap cells that are also valid in
/// h_curr; 0 when there are none.
double consistency_loss(const HeightMap& h_warped, const HeightMap& h_curr, const OverlapMask& m);

}  // namespace heightlab
