#pragma once

#include <optional>
#include <span>

#include "heightlab/fusion.hpp"
#include "heightlab/geometry.hpp"
#include "heightlab/heightgrid.hpp"
#include "heightlab/raster.hpp"

namespace heightlab {

struct LossWeights {
  double lambda_sa = 5.0;
  double lambda_cons = 2.0;
  double lambda_h = 10.0;

  /// Throws InvalidArgument if any weight is negative or non-finite.
  void validate() const;
};

/// Pixel neighbourhood receiving a bilinear splat. Pixels outside the image
/// simply receive nothing, so mass fades out continuously at the borders.
struct SplatStencil {
  int c0 = 0;
  int r0 = 0;
  double fu = 0.0;
  double fv = 0.0;
  bool active = false;  // at least one neighbour lies inside the image
};

/// Stencil for sub-pixel location (u, v) in a rows x cols image.
SplatStencil splat_stencil(int rows, int cols, double u, double v);

/// Adds mass to channel 0 of raster at the stencil's neighbours.
void splat(FeatureGrid& raster, const SplatStencil& s, double mass);

/// Projects each valid cell (X, Y, H_conf) into the image and splats its
/// confidence mass bilinearly into a single-channel raster (not clamped).
FeatureGrid splat_confidence(const HeightMap& h_conf, std::span<const double> cell_confidence,
                             const RoadFrame& frame, const CameraModel& cam);

/// Projects each valid cell (X, Y, H_conf) road -> ego -> camera -> pixel
/// and splats its confidence mass bilinearly into a single-channel image
/// raster, clamped to [0, 1]. Points at depth <= 1e-6 m drop out.
FeatureGrid project_confidence_to_image(const HeightMap& h_conf, std::span<const double> cell_confidence,
                                        const RoadFrame& frame, const CameraModel& cam);

/// Same, with confidence mass max_a alpha_a taken from the weight field.
FeatureGrid project_confidence_to_image(const HeightMap& h_conf, const WeightField& w, const RoadFrame& frame,
                                        const CameraModel& cam);

/// 1 - soft IoU, soft IoU = sum min(f, m) / sum max(f, m). With a threshold
/// the footprint is binarised (f >= threshold) first. Throws DataError when
/// both rasters are empty and InvalidArgument on a size mismatch.
double iou_loss_sa(const FeatureGrid& footprint, const GroundMask& m,
                   std::optional<double> hard_threshold = std::nullopt);

/// Mean |pred - gt| over jointly valid cells. Throws DataError when no cell
/// is valid in both, InvalidArgument when the grids differ.
double height_l1(const HeightMap& h_pred, const HeightMap& h_gt);

double total_loss(double l_sa, double l_cons, double l_h, const LossWeights& w = {});

}  // namespace heightlab
