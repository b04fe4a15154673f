#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heightlab/consistency.hpp"
#include "heightlab/fusion.hpp"
#include "heightlab/geometry.hpp"
#include "heightlab/heightgrid.hpp"
#include "heightlab/losses.hpp"
#include "heightlab/raster.hpp"

namespace heightlab {

struct Scene;

/// Linear map, shared by all BEV cells, from C feature channels to A anchor
/// logits: logits = weight^T f + bias.
struct PredictorParams {
  Eigen::MatrixXd weight;  // C x A
  Eigen::VectorXd bias;    // A

  static PredictorParams zeros(int channels, int anchors);

  int channels() const { return static_cast<int>(weight.rows()); }
  int anchors() const { return static_cast<int>(weight.cols()); }

  /// Throws InvalidArgument on non-finite entries or inconsistent sizes.
  void validate() const;
};

/// BEV input of the predictor: per cell, the mean of the anchor-sampled
/// features over valid anchors, weighted by the ground cue in channel 0.
/// Cells whose valid samples carry no ground weight fall back to the plain
/// mean; cells without valid anchors are zero.
FeatureGrid predictor_input(const SampledAnchors& sampled);

/// Throws InvalidArgument when the feature channel count differs from C.
AnchorLogits predict_logits(const PredictorParams& params, const FeatureGrid& bev_feat);

struct TrainConfig {
  double learning_rate = 0.1;
  int steps = 100;
  int batch_frames = 0;  // leading frames per sequence used for training; 0 = all
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  double init_scale = 0.0;  // seeded uniform init in [-s, s); 0 = zero init
  /// Compare the warped prediction with the current ground truth instead of
  /// the current prediction.
  bool consistency_against_gt = false;

  /// Throws InvalidArgument unless learning_rate >= 0 (0 freezes the
  /// parameters), steps >= 1 and the loss weights are valid.
  void validate() const;
};

/// Seeded initial parameters for a config.
PredictorParams initial_params(const TrainConfig& config, int channels, int anchors);

/// Static per-frame training inputs.
struct TrainFrame {
  RoadFrame frame;
  CameraModel camera;
  FeatureGrid bev_features;            // predictor_input of the sampled anchors
  std::vector<CellMask> anchor_valid;  // per anchor
  GroundMask ground;
  HeightMap ground_truth;
};

TrainFrame prepare_frame(const SlopeAnchorSet& anchors, const CameraModel& cam, const RoadFrame& frame,
                         const FeatureGrid& img_feat, const GroundMask& ground, const HeightMap& ground_truth);

/// Consecutive frames of one sequence; warps[k] maps frame k into frame k+1.
struct TrainSequence {
  std::vector<TrainFrame> frames;
  std::vector<WarpStencil> warps;
};

/// Builds the warps from the per-frame road frames and ego motions
/// (ego_motion[k] maps ego(k-1) into ego(k); entry 0 is unused).
TrainSequence make_sequence(std::vector<TrainFrame> frames, std::span<const RigidTransform> ego_motion);

/// Frames [first, first + count) of a generated scene.
TrainSequence sequence_from_scene(const Scene& scene, const SlopeAnchorSet& anchors, int first, int count);

struct TrainBatch {
  SlopeAnchorSet anchors;
  std::vector<TrainSequence> sequences;

  int frame_count() const;
  int pair_count() const;
};

struct LossBreakdown {
  double total = 0.0;
  double l_sa = 0.0;
  double l_cons = 0.0;
  double l_h = 0.0;
};

/// Intermediates of one forward pass, indexed by flattened frame / pair.
struct ForwardCache {
  LossWeights weights;
  bool consistency_against_gt = false;
  std::vector<WeightField> alpha;
  std::vector<HeightMap> height;
  std::vector<FeatureGrid> footprint;  // before clamping
  std::vector<WarpResult> warped;      // one per consecutive pair
};

struct ForwardResult {
  LossBreakdown loss;
  ForwardCache cache;
};

/// Total = l_sa * mean_frames(L_SA) + l_cons * mean_pairs(L_Cons)
///       + l_h * mean_frames(L1). Throws InvalidArgument when
/// lambda_cons > 0 and the batch has no consecutive pair.
ForwardResult forward_loss(const PredictorParams& params, const TrainBatch& batch, const LossWeights& weights,
                           bool consistency_against_gt = false);

/// Exact gradient of forward_loss w.r.t. the parameters, with subgradient 0
/// at L1 and clamp kinks. Deterministic for any worker count.
PredictorParams backward(const PredictorParams& params, const TrainBatch& batch, const ForwardCache& cache);

struct TrainResult {
  PredictorParams params;
  std::vector<LossBreakdown> trace;  // loss before each update
};

/// Full-batch gradient descent. Throws NumericalError when the loss becomes
/// non-finite or exceeds 10x its initial value.
TrainResult train(const TrainConfig& config, const TrainBatch& batch);
TrainResult train(const TrainConfig& config, const TrainBatch& batch, PredictorParams init);

/// H_conf for one frame under the given parameters.
HeightMap predict_heightmap(const PredictorParams& params, const SlopeAnchorSet& anchors, const TrainFrame& frame);

/// "step,loss,l_sa,l_cons,l_h" CSV.
std::string trace_csv(std::span<const LossBreakdown> trace);

// PRM1: magic "PRM1\n   ", C and A as little-endian float64, then the C x A
// weights (row-major, channel-major) and the A biases as float64.
inline constexpr std::string_view kPrm1Magic{"PRM1\n   ", 8};

std::string encode_params(const PredictorParams& params);
/// Throws DataError on a bad magic, bad dimensions or truncation.
PredictorParams decode_params(std::string_view bytes);
void write_params(const std::filesystem::path& path, const PredictorParams& params);
PredictorParams read_params(const std::filesystem::path& path);

}  // namespace heightlab
