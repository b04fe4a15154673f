#include "heightlab/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "heightlab/error.hpp"
#include "heightlab/parallel.hpp"

namespace heightlab {

SampledAnchors project_and_sample(const SlopeAnchorSet& anchors, const RoadFrame& frame,
                                  const CameraModel& cam, const FeatureGrid& img_feat) {
  const BevGrid& grid = anchors.grid();
  const int channels = img_feat.channels();
  const RigidTransform cam_from_road = camera_from_road(cam, frame);

  SampledAnchors out;
  out.features.reserve(anchors.size());
  out.valid.reserve(anchors.size());
  for (int a = 0; a < anchors.size(); ++a) {
    out.features.emplace_back(grid.rows, grid.cols, channels);
    out.valid.emplace_back(grid.cell_count(), 0);
  }

  parallel_for(static_cast<std::size_t>(grid.rows), [&](std::size_t row) {
    const int r = static_cast<int>(row);
    for (int a = 0; a < anchors.size(); ++a) {
      for (int c = 0; c < grid.cols; ++c) {
        const Vec2 xy = grid.cell_center(r, c);
        const Vec3 p_cam = cam_from_road.apply(Vec3(xy.x(), xy.y(), anchors.height(a, r, c)));
        const Projection proj = project_camera_point(cam.intrinsics(), p_cam);
        if (!proj.valid) continue;
        const bool ok = sample_bilinear(img_feat, proj.u, proj.v, out.features[a].cell(r, c));
        out.valid[a][static_cast<std::size_t>(r) * grid.cols + c] = ok ? 1 : 0;
      }
    }
  });
  return out;
}

FeatureGrid pooled_anchor_features(const SampledAnchors& sampled) {
  if (sampled.features.empty()) throw InvalidArgument("pooled_anchor_features: no anchors");
  const FeatureGrid& first = sampled.features.front();
  FeatureGrid pooled(first.rows(), first.cols(), first.channels());
  for (int r = 0; r < first.rows(); ++r) {
    for (int c = 0; c < first.cols(); ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * first.cols() + c;
      int n = 0;
      auto dst = pooled.cell(r, c);
      for (int a = 0; a < sampled.anchor_count(); ++a) {
        if (!sampled.valid[a][i]) continue;
        ++n;
        const auto src = sampled.features[a].cell(r, c);
        for (std::size_t ch = 0; ch < dst.size(); ++ch) dst[ch] += src[ch];
      }
      if (n > 1) {
        for (double& v : dst) v /= n;
      }
    }
  }
  return pooled;
}

AnchorLogits::AnchorLogits(int anchors, int rows, int cols, double fill)
    : anchors_(anchors), rows_(rows), cols_(cols),
      data_(static_cast<std::size_t>(anchors) * rows * cols, fill) {}

void mask_invalid_anchors(AnchorLogits& logits, const SampledAnchors& sampled) {
  if (logits.anchors() != sampled.anchor_count()) throw InvalidArgument("mask_invalid_anchors: anchor count mismatch");
  for (int a = 0; a < logits.anchors(); ++a) {
    for (int r = 0; r < logits.rows(); ++r) {
      for (int c = 0; c < logits.cols(); ++c) {
        if (!sampled.valid[a][static_cast<std::size_t>(r) * logits.cols() + c]) {
          logits.at(a, r, c) = -std::numeric_limits<double>::infinity();
        }
      }
    }
  }
}

WeightField::WeightField(const BevGrid& grid, int anchors)
    : grid_(grid), anchors_(anchors), weights_(static_cast<std::size_t>(anchors) * grid.cell_count(), 0.0),
      valid_(grid.cell_count(), 1) {
  if (anchors < 1) throw InvalidArgument("WeightField: at least one anchor is required");
}

double WeightField::max_weight(int r, int c) const {
  double m = 0.0;
  for (int a = 0; a < anchors_; ++a) m = std::max(m, at(a, r, c));
  return m;
}

WeightField softmax_weights(const AnchorLogits& logits, const BevGrid& grid) {
  if (logits.rows() != grid.rows || logits.cols() != grid.cols) {
    throw InvalidArgument("softmax_weights: logits do not match the grid");
  }
  const int n = logits.anchors();
  WeightField w(grid, n);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      double peak = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < n; ++a) peak = std::max(peak, logits.at(a, r, c));
      if (peak == -std::numeric_limits<double>::infinity()) {
        for (int a = 0; a < n; ++a) w.at(a, r, c) = 1.0 / n;
        w.set_cell_valid(r, c, false);
        continue;
      }
      double total = 0.0;
      for (int a = 0; a < n; ++a) {
        const double e = std::exp(logits.at(a, r, c) - peak);
        w.at(a, r, c) = e;
        total += e;
      }
      for (int a = 0; a < n; ++a) w.at(a, r, c) /= total;
    }
  }
  return w;
}

FeatureGrid fuse_features(std::span<const FeatureGrid> sampled, const WeightField& w) {
  if (static_cast<int>(sampled.size()) != w.anchors() || sampled.empty()) {
    throw InvalidArgument("fuse_features: anchor count mismatch");
  }
  const FeatureGrid& first = sampled.front();
  for (const FeatureGrid& f : sampled) {
    if (!f.same_shape(first) || f.rows() != w.grid().rows || f.cols() != w.grid().cols) {
      throw InvalidArgument("fuse_features: shape mismatch");
    }
  }
  FeatureGrid fused(first.rows(), first.cols(), first.channels());
  for (int r = 0; r < first.rows(); ++r) {
    for (int c = 0; c < first.cols(); ++c) {
      auto dst = fused.cell(r, c);
      for (int a = 0; a < w.anchors(); ++a) {
        const double alpha = w.at(a, r, c);
        const auto src = sampled[a].cell(r, c);
        for (std::size_t ch = 0; ch < dst.size(); ++ch) dst[ch] += alpha * src[ch];
      }
    }
  }
  return fused;
}

HeightMap confidence_heightmap(const SlopeAnchorSet& anchors, const WeightField& w) {
  if (anchors.size() != w.anchors() || !(anchors.grid() == w.grid())) {
    throw InvalidArgument("confidence_heightmap: anchors and weights disagree");
  }
  HeightMap h(anchors.grid());
  for (int r = 0; r < h.rows(); ++r) {
    for (int c = 0; c < h.cols(); ++c) {
      if (!w.cell_valid(r, c)) {
        h.set_nodata(r, c);
        continue;
      }
      double z = 0.0;
      for (int a = 0; a < anchors.size(); ++a) z += w.at(a, r, c) * anchors.height(a, r, c);
      h.set(r, c, z);
    }
  }
  return h;
}

}  // namespace heightlab
