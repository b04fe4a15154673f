#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "heightlab/geometry.hpp"
#include "heightlab/heightgrid.hpp"
#include "heightlab/raster.hpp"

namespace heightlab {

/// Per-cell binary mask over a BEV grid (row-major).
using CellMask = std::vector<std::uint8_t>;

/// Anchor-sampled BEV features: one rows x cols x C grid per anchor plus the
/// validity of each anchor's projection.
struct SampledAnchors {
  std::vector<FeatureGrid> features;
  std::vector<CellMask> valid;

  int anchor_count() const { return static_cast<int>(features.size()); }
};

/// For every anchor and cell, lifts (X, Y, Z_a) from road to ego, projects
/// into the camera and bilinearly samples the image features. Projections
/// behind the camera or outside the image produce zero features and an
/// invalid flag.
SampledAnchors project_and_sample(const SlopeAnchorSet& anchors, const RoadFrame& frame,
                                  const CameraModel& cam, const FeatureGrid& img_feat);

/// Mean over valid anchors of the sampled features (zero where no anchor is
/// valid). Used as the BEV input of the linear weight predictor.
FeatureGrid pooled_anchor_features(const SampledAnchors& sampled);

/// A x rows x cols anchor logits. Entries may be -infinity to exclude an
/// anchor at a cell.
class AnchorLogits {
 public:
  AnchorLogits() = default;
  AnchorLogits(int anchors, int rows, int cols, double fill = 0.0);

  int anchors() const { return anchors_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& at(int a, int r, int c) { return data_[index(a, r, c)]; }
  double at(int a, int r, int c) const { return data_[index(a, r, c)]; }

 private:
  std::size_t index(int a, int r, int c) const {
    return (static_cast<std::size_t>(a) * rows_ + r) * cols_ + c;
  }
  int anchors_ = 0, rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// Sets the logit of every invalid anchor projection to -infinity.
void mask_invalid_anchors(AnchorLogits& logits, const SampledAnchors& sampled);

/// Per-cell anchor probabilities. A cell whose logits are all -infinity gets
/// uniform weights and is flagged invalid.
class WeightField {
 public:
  WeightField(const BevGrid& grid, int anchors);

  const BevGrid& grid() const { return grid_; }
  int anchors() const { return anchors_; }
  double& at(int a, int r, int c) { return weights_[index(a, r, c)]; }
  double at(int a, int r, int c) const { return weights_[index(a, r, c)]; }
  bool cell_valid(int r, int c) const { return valid_[static_cast<std::size_t>(r) * grid_.cols + c] != 0; }
  void set_cell_valid(int r, int c, bool v) { valid_[static_cast<std::size_t>(r) * grid_.cols + c] = v ? 1 : 0; }

  /// max_a alpha_a at a cell.
  double max_weight(int r, int c) const;

 private:
  std::size_t index(int a, int r, int c) const {
    return (static_cast<std::size_t>(a) * grid_.rows + r) * grid_.cols + c;
  }
  BevGrid grid_;
  int anchors_;
  std::vector<double> weights_;
  CellMask valid_;
};

/// Softmax over the anchor axis with max subtraction.
WeightField softmax_weights(const AnchorLogits& logits, const BevGrid& grid);

/// F_SA(X, Y) = sum_a alpha_a(X, Y) F^a(X, Y). Throws InvalidArgument on
/// shape mismatch.
FeatureGrid fuse_features(std::span<const FeatureGrid> sampled, const WeightField& w);

/// H_conf(X, Y) = sum_a alpha_a(X, Y) Anchor_a(X, Y). Cells flagged invalid
/// in the weight field become no-data.
HeightMap confidence_heightmap(const SlopeAnchorSet& anchors, const WeightField& w);

}  // namespace heightlab
