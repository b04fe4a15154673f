#include "heightlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "heightlab/error.hpp"
#include "heightlab/numeric.hpp"

namespace heightlab {

void LossWeights::validate() const {
  for (double w : {lambda_sa, lambda_cons, lambda_h}) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("LossWeights: weights must be finite and >= 0");
  }
}

SplatStencil splat_stencil(int rows, int cols, double u, double v) {
  SplatStencil s;
  if (!(u > -1.0 && u < cols && v > -1.0 && v < rows)) return s;
  const double fc = std::floor(u), fr = std::floor(v);
  s.c0 = static_cast<int>(fc);
  s.r0 = static_cast<int>(fr);
  s.fu = u - fc;
  s.fv = v - fr;
  s.active = true;
  return s;
}

void splat(FeatureGrid& raster, const SplatStencil& s, double mass) {
  if (!s.active) return;
  const double w[4] = {(1 - s.fu) * (1 - s.fv), s.fu * (1 - s.fv), (1 - s.fu) * s.fv, s.fu * s.fv};
  const int rr[4] = {s.r0, s.r0, s.r0 + 1, s.r0 + 1};
  const int cc[4] = {s.c0, s.c0 + 1, s.c0, s.c0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (rr[k] < 0 || rr[k] >= raster.rows() || cc[k] < 0 || cc[k] >= raster.cols()) continue;
    raster.at(rr[k], cc[k]) += w[k] * mass;
  }
}

FeatureGrid splat_confidence(const HeightMap& h_conf, std::span<const double> cell_confidence,
                             const RoadFrame& frame, const CameraModel& cam) {
  const BevGrid& grid = h_conf.grid();
  if (cell_confidence.size() != grid.cell_count()) {
    throw InvalidArgument("project_confidence_to_image: confidence size does not match the grid");
  }
  const Intrinsics& k = cam.intrinsics();
  const RigidTransform cam_from_road = camera_from_road(cam, frame);

  FeatureGrid footprint(k.height, k.width, 1);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      if (!h_conf.valid(r, c)) continue;
      const Vec2 xy = grid.cell_center(r, c);
      const Vec3 p = cam_from_road.apply(Vec3(xy.x(), xy.y(), h_conf.at(r, c)));
      if (!(p.z() > kDepthEpsilon)) continue;
      const double u = k.fx * p.x() / p.z() + k.cx;
      const double v = k.fy * p.y() / p.z() + k.cy;
      splat(footprint, splat_stencil(k.height, k.width, u, v),
            cell_confidence[static_cast<std::size_t>(r) * grid.cols + c]);
    }
  }
  return footprint;
}

FeatureGrid project_confidence_to_image(const HeightMap& h_conf, std::span<const double> cell_confidence,
                                        const RoadFrame& frame, const CameraModel& cam) {
  FeatureGrid footprint = splat_confidence(h_conf, cell_confidence, frame, cam);
  for (double& f : footprint.data()) f = std::clamp(f, 0.0, 1.0);
  return footprint;
}

FeatureGrid project_confidence_to_image(const HeightMap& h_conf, const WeightField& w, const RoadFrame& frame,
                                        const CameraModel& cam) {
  const BevGrid& grid = h_conf.grid();
  std::vector<double> conf(grid.cell_count(), 0.0);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) conf[static_cast<std::size_t>(r) * grid.cols + c] = w.max_weight(r, c);
  }
  return project_confidence_to_image(h_conf, conf, frame, cam);
}

double iou_loss_sa(const FeatureGrid& footprint, const GroundMask& m, std::optional<double> hard_threshold) {
  if (footprint.rows() != m.rows() || footprint.cols() != m.cols() || footprint.channels() != 1) {
    throw InvalidArgument("iou_loss_sa: footprint and mask sizes differ");
  }
  const auto f = footprint.data();
  const auto g = m.data();
  std::vector<double> mins(f.size()), maxs(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    double fi = f[i];
    if (hard_threshold) fi = fi >= *hard_threshold ? 1.0 : 0.0;
    if (g[i]) {
      mins[i] = std::min(fi, 1.0);
      maxs[i] = std::max(fi, 1.0);
    } else {
      mins[i] = std::min(fi, 0.0);
      maxs[i] = std::max(fi, 0.0);
    }
  }
  const double union_mass = pairwise_sum(maxs);
  if (!(union_mass > 0.0)) throw DataError("iou_loss_sa: footprint and ground mask are both empty");
  return 1.0 - pairwise_sum(mins) / union_mass;
}

double height_l1(const HeightMap& h_pred, const HeightMap& h_gt) {
  if (!(h_pred.grid() == h_gt.grid())) throw InvalidArgument("height_l1: grids differ");
  std::vector<double> diffs;
  diffs.reserve(h_pred.grid().cell_count());
  for (int r = 0; r < h_pred.rows(); ++r) {
    for (int c = 0; c < h_pred.cols(); ++c) {
      if (h_pred.valid(r, c) && h_gt.valid(r, c)) diffs.push_back(std::abs(h_pred.at(r, c) - h_gt.at(r, c)));
    }
  }
  if (diffs.empty()) throw DataError("height_l1: no jointly valid cell");
  return pairwise_sum(diffs) / static_cast<double>(diffs.size());
}

double total_loss(double l_sa, double l_cons, double l_h, const LossWeights& w) {
  w.validate();
  return w.lambda_sa * l_sa + w.lambda_cons * l_cons + w.lambda_h * l_h;
}

}  // namespace heightlab
