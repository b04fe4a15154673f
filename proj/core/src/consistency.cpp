#include "heightlab/consistency.hpp"

#include <algorithm>
#include <cmath>

#include "heightlab/error.hpp"
#include "heightlab/numeric.hpp"

namespace heightlab {

RigidTransform relative_transform(const RoadFrame& frame_prev, const RoadFrame& frame_curr,
                                  const RigidTransform& ego_motion) {
  return compose(frame_curr.road_from_ego(), compose(ego_motion, frame_prev.ego_from_road()));
}

std::size_t OverlapMask::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

WarpStencil build_warp_stencil(const BevGrid& source_grid, const RigidTransform& t_rel, const BevGrid& target_grid) {
  source_grid.validate();
  target_grid.validate();
  const Mat3& rot = t_rel.rotation();
  if (rot(2, 2) <= std::cos(kMaxWarpTiltRadians)) {
    throw NumericalError("warp: relative transform tilts the road plane by 45 degrees or more");
  }

  WarpStencil st;
  st.source_grid = source_grid;
  st.target_grid = target_grid;
  st.z_gain = rot(2, 2);
  st.entries.resize(target_grid.cell_count());

  const RigidTransform inv = invert(t_rel);
  for (int r = 0; r < target_grid.rows; ++r) {
    for (int c = 0; c < target_grid.cols; ++c) {
      WarpStencil::Entry& e = st.entries[static_cast<std::size_t>(r) * target_grid.cols + c];
      const Vec2 pt = target_grid.cell_center(r, c);
      const Vec3 src = inv.apply(Vec3(pt.x(), pt.y(), 0.0));
      e.z_offset = rot(2, 0) * src.x() + rot(2, 1) * src.y() + t_rel.translation().z();

      const Vec2 idx = source_grid.continuous_index(src.x(), src.y());
      const double u = idx.x(), v = idx.y();
      if (!(u >= 0.0 && u <= source_grid.cols - 1 && v >= 0.0 && v <= source_grid.rows - 1)) continue;

      const BilinearStencil b = bilinear_stencil(source_grid.rows, source_grid.cols, u, v);
      const int c1 = std::min(b.c0 + 1, source_grid.cols - 1);
      const int r1 = std::min(b.r0 + 1, source_grid.rows - 1);
      const auto flat = [&](int rr, int cc) { return static_cast<std::int32_t>(rr * source_grid.cols + cc); };
      e.source = {flat(b.r0, b.c0), flat(b.r0, c1), flat(r1, b.c0), flat(r1, c1)};
      e.weight = {(1 - b.fu) * (1 - b.fv), b.fu * (1 - b.fv), (1 - b.fu) * b.fv, b.fu * b.fv};
      e.in_domain = true;
    }
  }
  return st;
}

WarpResult apply_warp(const WarpStencil& stencil, const HeightMap& h_prev) {
  if (!(h_prev.grid() == stencil.source_grid)) throw InvalidArgument("warp: height map does not match stencil source grid");

  const BevGrid& tg = stencil.target_grid;
  WarpResult out{HeightMap(tg), OverlapMask{tg.rows, tg.cols, std::vector<std::uint8_t>(tg.cell_count(), 0)}};
  const auto values = h_prev.values();
  const auto valid = h_prev.validity();

  for (int r = 0; r < tg.rows; ++r) {
    for (int c = 0; c < tg.cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * tg.cols + c;
      const WarpStencil::Entry& e = stencil.entries[i];
      bool ok = e.in_domain;
      double h = 0.0;
      for (int k = 0; ok && k < 4; ++k) {
        if (e.weight[k] == 0.0) continue;
        if (!valid[e.source[k]]) {
          ok = false;
          break;
        }
        h += e.weight[k] * values[e.source[k]];
      }
      if (!ok) {
        out.warped.set_nodata(r, c);
        continue;
      }
      out.warped.set(r, c, stencil.z_gain * h + e.z_offset);
      out.overlap.mask[i] = 1;
    }
  }
  return out;
}

WarpResult warp_heightmap(const HeightMap& h_prev, const RigidTransform& t_rel, const BevGrid& target_grid) {
  return apply_warp(build_warp_stencil(h_prev.grid(), t_rel, target_grid), h_prev);
}

double consistency_loss(const HeightMap& h_warped, const HeightMap& h_curr, const OverlapMask& m) {
  if (!(h_warped.grid() == h_curr.grid()) || m.rows != h_curr.rows() || m.cols != h_curr.cols()) {
    throw InvalidArgument("consistency_loss: shape mismatch");
  }
  std::vector<double> diffs;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      if (!m.at(r, c) || !h_curr.valid(r, c) || !h_warped.valid(r, c)) continue;
      diffs.push_back(std::abs(h_warped.at(r, c) - h_curr.at(r, c)));
    }
  }
  if (diffs.empty()) return 0.0;
  return pairwise_sum(diffs) / static_cast<double>(diffs.size());
}

}  // namespace heightlab
