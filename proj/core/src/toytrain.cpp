#include "heightlab/toytrain.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "heightlab/error.hpp"
#include "heightlab/numeric.hpp"
#include "heightlab/parallel.hpp"
#include "heightlab/synth.hpp"

namespace heightlab {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kDivergenceFactor = 10.0;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct PairRef {
  int prev = 0;  // flattened frame index
  int curr = 0;
  const WarpStencil* warp = nullptr;
};

struct BatchIndex {
  std::vector<const TrainFrame*> frames;
  std::vector<PairRef> pairs;
};

BatchIndex index_batch(const TrainBatch& batch) {
  BatchIndex idx;
  for (const TrainSequence& seq : batch.sequences) {
    if (seq.warps.size() + 1 != seq.frames.size() && !seq.frames.empty()) {
      throw InvalidArgument("TrainSequence: expected one warp per consecutive frame pair");
    }
    const int base = static_cast<int>(idx.frames.size());
    for (const TrainFrame& f : seq.frames) idx.frames.push_back(&f);
    for (std::size_t k = 0; k < seq.warps.size(); ++k) {
      idx.pairs.push_back({base + static_cast<int>(k), base + static_cast<int>(k) + 1, &seq.warps[k]});
    }
  }
  if (idx.frames.empty()) throw InvalidArgument("TrainBatch: no frames");
  return idx;
}

WeightField frame_weights(const PredictorParams& params, const SlopeAnchorSet& anchors, const TrainFrame& f) {
  AnchorLogits logits = predict_logits(params, f.bev_features);
  const BevGrid& g = anchors.grid();
  for (int a = 0; a < logits.anchors(); ++a) {
    const CellMask& valid = f.anchor_valid[a];
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        if (!valid[static_cast<std::size_t>(r) * g.cols + c]) logits.at(a, r, c) = kNegInf;
      }
    }
  }
  return softmax_weights(logits, g);
}

std::vector<double> max_weights(const WeightField& w) {
  const BevGrid& g = w.grid();
  std::vector<double> m(g.cell_count());
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) m[static_cast<std::size_t>(r) * g.cols + c] = w.max_weight(r, c);
  }
  return m;
}

FeatureGrid clamped(const FeatureGrid& raw) {
  FeatureGrid out = raw;
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// dL/dF per image pixel for L = 1 - S_in / (N_mask + S_out) on the clamped
// footprint; zero where the clamp is active.
std::vector<double> iou_pixel_gradient(const FeatureGrid& raw, const GroundMask& mask) {
  const auto f = raw.data();
  const auto m = mask.data();
  std::vector<double> in_terms, out_terms;
  double n_mask = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fc = std::min(f[i], 1.0);
    if (m[i]) {
      n_mask += 1.0;
      in_terms.push_back(fc);
    } else {
      out_terms.push_back(fc);
    }
  }
  const double s_in = pairwise_sum(in_terms);
  const double denom = n_mask + pairwise_sum(out_terms);
  std::vector<double> g(f.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(f[i] < 1.0)) continue;
    g[i] = m[i] ? -1.0 / denom : s_in / (denom * denom);
  }
  return g;
}

}  // namespace

PredictorParams PredictorParams::zeros(int channels, int anchors) {
  if (channels < 1 || anchors < 1) throw InvalidArgument("PredictorParams: dimensions must be positive");
  return {Eigen::MatrixXd::Zero(channels, anchors), Eigen::VectorXd::Zero(anchors)};
}

void PredictorParams::validate() const {
  if (weight.rows() < 1 || weight.cols() < 1 || bias.size() != weight.cols()) {
    throw InvalidArgument("PredictorParams: inconsistent dimensions");
  }
  if (!weight.allFinite() || !bias.allFinite()) throw InvalidArgument("PredictorParams: non-finite entry");
}

FeatureGrid predictor_input(const SampledAnchors& sampled) {
  if (sampled.features.empty()) throw InvalidArgument("predictor_input: no anchors");
  const FeatureGrid& first = sampled.features.front();
  FeatureGrid out(first.rows(), first.cols(), first.channels());
  const int n_a = sampled.anchor_count();
  for (int r = 0; r < first.rows(); ++r) {
    for (int c = 0; c < first.cols(); ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * first.cols() + c;
      double ground = 0.0;
      int valid = 0;
      for (int a = 0; a < n_a; ++a) {
        if (!sampled.valid[a][i]) continue;
        ++valid;
        ground += std::max(sampled.features[a].at(r, c, 0), 0.0);
      }
      if (valid == 0) continue;
      auto dst = out.cell(r, c);
      for (int a = 0; a < n_a; ++a) {
        if (!sampled.valid[a][i]) continue;
        const auto src = sampled.features[a].cell(r, c);
        const double w = ground > 0.0 ? std::max(src[0], 0.0) / ground : 1.0 / valid;
        for (std::size_t ch = 0; ch < dst.size(); ++ch) dst[ch] += w * src[ch];
      }
    }
  }
  return out;
}

AnchorLogits predict_logits(const PredictorParams& params, const FeatureGrid& bev_feat) {
  params.validate();
  if (bev_feat.channels() != params.channels()) {
    throw InvalidArgument(fmt::format("predict_logits: features have {} channels, predictor expects {}",
                                      bev_feat.channels(), params.channels()));
  }
  const int n_a = params.anchors(), n_c = params.channels();
  AnchorLogits logits(n_a, bev_feat.rows(), bev_feat.cols());
  for (int r = 0; r < bev_feat.rows(); ++r) {
    for (int c = 0; c < bev_feat.cols(); ++c) {
      const auto f = bev_feat.cell(r, c);
      for (int a = 0; a < n_a; ++a) {
        double z = params.bias[a];
        for (int ch = 0; ch < n_c; ++ch) z += params.weight(ch, a) * f[ch];
        logits.at(a, r, c) = z;
      }
    }
  }
  return logits;
}

void TrainConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw InvalidArgument("TrainConfig: learning_rate must be finite and >= 0");
  }
  if (steps < 1) throw InvalidArgument("TrainConfig: steps must be >= 1");
  if (batch_frames < 0) throw InvalidArgument("TrainConfig: batch_frames must be >= 0");
  if (!std::isfinite(init_scale) || init_scale < 0.0) throw InvalidArgument("TrainConfig: init_scale must be >= 0");
  loss_weights.validate();
}

PredictorParams initial_params(const TrainConfig& config, int channels, int anchors) {
  PredictorParams p = PredictorParams::zeros(channels, anchors);
  if (config.init_scale == 0.0) return p;
  std::uint64_t counter = 0;
  for (int ch = 0; ch < channels; ++ch) {
    for (int a = 0; a < anchors; ++a) p.weight(ch, a) = config.init_scale * hash_uniform_signed(config.seed, counter++);
  }
  for (int a = 0; a < anchors; ++a) p.bias[a] = config.init_scale * hash_uniform_signed(config.seed, counter++);
  return p;
}

TrainFrame prepare_frame(const SlopeAnchorSet& anchors, const CameraModel& cam, const RoadFrame& frame,
                         const FeatureGrid& img_feat, const GroundMask& ground, const HeightMap& ground_truth) {
  if (!(ground_truth.grid() == anchors.grid())) throw InvalidArgument("prepare_frame: ground truth grid differs");
  if (ground.rows() != cam.height() || ground.cols() != cam.width()) {
    throw InvalidArgument("prepare_frame: ground mask does not match the camera");
  }
  SampledAnchors sampled = project_and_sample(anchors, frame, cam, img_feat);
  FeatureGrid pooled = predictor_input(sampled);
  return TrainFrame{frame, cam, std::move(pooled), std::move(sampled.valid), ground, ground_truth};
}

TrainSequence make_sequence(std::vector<TrainFrame> frames, std::span<const RigidTransform> ego_motion) {
  if (ego_motion.size() != frames.size()) throw InvalidArgument("make_sequence: one ego motion per frame expected");
  TrainSequence seq;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const RigidTransform t_rel = relative_transform(frames[k - 1].frame, frames[k].frame, ego_motion[k]);
    seq.warps.push_back(
        build_warp_stencil(frames[k - 1].ground_truth.grid(), t_rel, frames[k].ground_truth.grid()));
  }
  seq.frames = std::move(frames);
  return seq;
}

TrainSequence sequence_from_scene(const Scene& scene, const SlopeAnchorSet& anchors, int first, int count) {
  if (first < 0 || count < 1 || first + count > static_cast<int>(scene.frames.size())) {
    throw InvalidArgument("sequence_from_scene: frame range outside the scene");
  }
  std::vector<TrainFrame> frames;
  std::vector<RigidTransform> motion;
  for (int k = first; k < first + count; ++k) {
    const FrameData& fd = scene.frames[k];
    frames.push_back(
        prepare_frame(anchors, scene.camera, fd.pose.frame, fd.features, fd.render.mask, fd.ground_truth));
    motion.push_back(scene.trajectory.ego_motion[k]);
  }
  return make_sequence(std::move(frames), motion);
}

int TrainBatch::frame_count() const {
  int n = 0;
  for (const TrainSequence& s : sequences) n += static_cast<int>(s.frames.size());
  return n;
}

int TrainBatch::pair_count() const {
  int n = 0;
  for (const TrainSequence& s : sequences) n += static_cast<int>(s.warps.size());
  return n;
}

HeightMap predict_heightmap(const PredictorParams& params, const SlopeAnchorSet& anchors, const TrainFrame& frame) {
  HeightMap h = confidence_heightmap(anchors, frame_weights(params, anchors, frame));
  h.set_frame(frame.frame);
  return h;
}

ForwardResult forward_loss(const PredictorParams& params, const TrainBatch& batch, const LossWeights& weights,
                           bool consistency_against_gt) {
  weights.validate();
  params.validate();
  if (params.anchors() != batch.anchors.size()) throw InvalidArgument("forward_loss: anchor count mismatch");
  const BatchIndex idx = index_batch(batch);
  if (weights.lambda_cons > 0.0 && idx.pairs.empty()) {
    throw InvalidArgument("forward_loss: the consistency term needs at least two consecutive frames");
  }
  const std::size_t n_frames = idx.frames.size(), n_pairs = idx.pairs.size();

  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.weights = weights;
  cache.consistency_against_gt = consistency_against_gt;
  cache.alpha.assign(n_frames, WeightField(batch.anchors.grid(), batch.anchors.size()));
  cache.height.resize(n_frames);
  cache.footprint.resize(n_frames);
  std::vector<double> l_sa(n_frames), l_h(n_frames), l_cons(n_pairs);

  parallel_for(n_frames, [&](std::size_t i) {
    const TrainFrame& f = *idx.frames[i];
    cache.alpha[i] = frame_weights(params, batch.anchors, f);
    cache.height[i] = confidence_heightmap(batch.anchors, cache.alpha[i]);
    cache.height[i].set_frame(f.frame);
    cache.footprint[i] = splat_confidence(cache.height[i], max_weights(cache.alpha[i]), f.frame, f.camera);
    l_sa[i] = iou_loss_sa(clamped(cache.footprint[i]), f.ground);
    l_h[i] = height_l1(cache.height[i], f.ground_truth);
  });

  cache.warped.resize(n_pairs);
  parallel_for(n_pairs, [&](std::size_t p) {
    const PairRef& pr = idx.pairs[p];
    cache.warped[p] = apply_warp(*pr.warp, cache.height[pr.prev]);
    const HeightMap& target = consistency_against_gt ? idx.frames[pr.curr]->ground_truth : cache.height[pr.curr];
    l_cons[p] = consistency_loss(cache.warped[p].warped, target, cache.warped[p].overlap);
  });

  LossBreakdown& loss = out.loss;
  loss.l_sa = pairwise_sum(l_sa) / static_cast<double>(n_frames);
  loss.l_h = pairwise_sum(l_h) / static_cast<double>(n_frames);
  loss.l_cons = n_pairs ? pairwise_sum(l_cons) / static_cast<double>(n_pairs) : 0.0;
  loss.total = total_loss(loss.l_sa, loss.l_cons, loss.l_h, weights);
  if (!std::isfinite(loss.total)) throw NumericalError("forward_loss: non-finite loss");
  return out;
}

PredictorParams backward(const PredictorParams& params, const TrainBatch& batch, const ForwardCache& cache) {
  const BatchIndex idx = index_batch(batch);
  const std::size_t n_frames = idx.frames.size(), n_pairs = idx.pairs.size();
  if (cache.alpha.size() != n_frames || cache.warped.size() != n_pairs) {
    throw InvalidArgument("backward: cache does not belong to this batch");
  }
  const BevGrid& grid = batch.anchors.grid();
  const std::size_t n_cells = grid.cell_count();
  const int n_a = params.anchors(), n_c = params.channels();
  const LossWeights& lw = cache.weights;

  // Consistency term: per-pair gradient w.r.t. the previous and current maps.
  std::vector<std::vector<double>> pair_prev(n_pairs), pair_curr(n_pairs);
  const double cons_scale = n_pairs ? lw.lambda_cons / static_cast<double>(n_pairs) : 0.0;
  parallel_for(n_pairs, [&](std::size_t p) {
    const PairRef& pr = idx.pairs[p];
    const WarpResult& wr = cache.warped[p];
    const HeightMap& target =
        cache.consistency_against_gt ? idx.frames[pr.curr]->ground_truth : cache.height[pr.curr];
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < n_cells; ++i) {
      const int r = static_cast<int>(i / grid.cols), c = static_cast<int>(i % grid.cols);
      if (wr.overlap.mask[i] && target.valid(r, c) && wr.warped.valid(r, c)) used.push_back(i);
    }
    pair_prev[p].assign(n_cells, 0.0);
    pair_curr[p].assign(n_cells, 0.0);
    if (used.empty() || cons_scale == 0.0) return;
    const double scale = cons_scale / static_cast<double>(used.size());
    for (std::size_t i : used) {
      const int r = static_cast<int>(i / grid.cols), c = static_cast<int>(i % grid.cols);
      const double s = scale * sign(wr.warped.at(r, c) - target.at(r, c));
      if (!cache.consistency_against_gt) pair_curr[p][i] -= s;
      const WarpStencil::Entry& e = pr.warp->entries[i];
      for (int k = 0; k < 4; ++k) pair_prev[p][e.source[k]] += s * pr.warp->z_gain * e.weight[k];
    }
  });

  std::vector<std::vector<int>> as_prev(n_frames), as_curr(n_frames);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    as_prev[idx.pairs[p].prev].push_back(static_cast<int>(p));
    as_curr[idx.pairs[p].curr].push_back(static_cast<int>(p));
  }

  const double frame_scale = 1.0 / static_cast<double>(n_frames);
  std::vector<PredictorParams> per_frame(n_frames);
  parallel_for(n_frames, [&](std::size_t fi) {
    const TrainFrame& f = *idx.frames[fi];
    const WeightField& alpha = cache.alpha[fi];
    const HeightMap& h = cache.height[fi];
    std::vector<double> g_h(n_cells, 0.0), g_m(n_cells, 0.0);

    // Height L1.
    if (lw.lambda_h > 0.0) {
      std::size_t n = 0;
      for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) n += h.valid(r, c) && f.ground_truth.valid(r, c);
      }
      const double scale = lw.lambda_h * frame_scale / static_cast<double>(n);
      for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
          if (!h.valid(r, c) || !f.ground_truth.valid(r, c)) continue;
          g_h[static_cast<std::size_t>(r) * grid.cols + c] += scale * sign(h.at(r, c) - f.ground_truth.at(r, c));
        }
      }
    }

    for (int p : as_curr[fi]) {
      for (std::size_t i = 0; i < n_cells; ++i) g_h[i] += pair_curr[p][i];
    }
    for (int p : as_prev[fi]) {
      for (std::size_t i = 0; i < n_cells; ++i) g_h[i] += pair_prev[p][i];
    }

    // Splat IoU: through the confidence mass and the projected location.
    if (lw.lambda_sa > 0.0) {
      const FeatureGrid& raw = cache.footprint[fi];
      std::vector<double> g_pix = iou_pixel_gradient(raw, f.ground);
      for (double& g : g_pix) g *= lw.lambda_sa * frame_scale;
      const Intrinsics& k = f.camera.intrinsics();
      const RigidTransform cam_from_road = camera_from_road(f.camera, f.frame);
      const Vec3 q = cam_from_road.rotation().col(2);
      const auto pix = [&](int rr, int cc) -> double {
        if (rr < 0 || rr >= k.height || cc < 0 || cc >= k.width) return 0.0;
        return g_pix[static_cast<std::size_t>(rr) * k.width + cc];
      };
      for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
          if (!h.valid(r, c)) continue;
          const Vec2 xy = grid.cell_center(r, c);
          const Vec3 p = cam_from_road.apply(Vec3(xy.x(), xy.y(), h.at(r, c)));
          if (!(p.z() > kDepthEpsilon)) continue;
          const double u = k.fx * p.x() / p.z() + k.cx;
          const double v = k.fy * p.y() / p.z() + k.cy;
          const SplatStencil s = splat_stencil(k.height, k.width, u, v);
          if (!s.active) continue;
          const double g00 = pix(s.r0, s.c0), g01 = pix(s.r0, s.c0 + 1);
          const double g10 = pix(s.r0 + 1, s.c0), g11 = pix(s.r0 + 1, s.c0 + 1);
          const double fu = s.fu, fv = s.fv;
          const std::size_t i = static_cast<std::size_t>(r) * grid.cols + c;
          const double mass = alpha.max_weight(r, c);
          g_m[i] += (1 - fu) * (1 - fv) * g00 + fu * (1 - fv) * g01 + (1 - fu) * fv * g10 + fu * fv * g11;
          const double d_u = mass * ((1 - fv) * (g01 - g00) + fv * (g11 - g10));
          const double d_v = mass * ((1 - fu) * (g10 - g00) + fu * (g11 - g01));
          const double du_dh = k.fx * (q.x() * p.z() - p.x() * q.z()) / (p.z() * p.z());
          const double dv_dh = k.fy * (q.y() * p.z() - p.y() * q.z()) / (p.z() * p.z());
          g_h[i] += d_u * du_dh + d_v * dv_dh;
        }
      }
    }

    // Softmax and linear layer.
    PredictorParams grad = PredictorParams::zeros(n_c, n_a);
    std::vector<double> g_alpha(static_cast<std::size_t>(n_a)), g_z(static_cast<std::size_t>(n_a));
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        if (!alpha.cell_valid(r, c)) continue;
        const std::size_t i = static_cast<std::size_t>(r) * grid.cols + c;
        if (g_h[i] == 0.0 && g_m[i] == 0.0) continue;
        int arg = 0;
        for (int a = 1; a < n_a; ++a) arg = alpha.at(a, r, c) > alpha.at(arg, r, c) ? a : arg;
        double mean = 0.0;
        for (int a = 0; a < n_a; ++a) {
          g_alpha[a] = g_h[i] * batch.anchors.height(a, r, c) + (a == arg ? g_m[i] : 0.0);
          mean += alpha.at(a, r, c) * g_alpha[a];
        }
        const auto feat = f.bev_features.cell(r, c);
        for (int a = 0; a < n_a; ++a) {
          g_z[a] = alpha.at(a, r, c) * (g_alpha[a] - mean);
          if (g_z[a] == 0.0) continue;
          grad.bias[a] += g_z[a];
          for (int ch = 0; ch < n_c; ++ch) grad.weight(ch, a) += g_z[a] * feat[ch];
        }
      }
    }
    per_frame[fi] = std::move(grad);
  });

  PredictorParams total = PredictorParams::zeros(n_c, n_a);
  for (const PredictorParams& g : per_frame) {
    total.weight += g.weight;
    total.bias += g.bias;
  }
  return total;
}

TrainResult train(const TrainConfig& config, const TrainBatch& batch) {
  config.validate();
  int channels = 0;
  for (const TrainSequence& s : batch.sequences) {
    if (!s.frames.empty()) channels = s.frames.front().bev_features.channels();
  }
  if (channels == 0) throw InvalidArgument("train: empty batch");
  return train(config, batch, initial_params(config, channels, batch.anchors.size()));
}

TrainResult train(const TrainConfig& config, const TrainBatch& batch, PredictorParams init) {
  config.validate();
  init.validate();
  TrainResult result{std::move(init), {}};
  result.trace.reserve(static_cast<std::size_t>(config.steps));
  double initial = 0.0;
  for (int step = 0; step < config.steps; ++step) {
    ForwardResult fr = forward_loss(result.params, batch, config.loss_weights, config.consistency_against_gt);
    if (step == 0) initial = fr.loss.total;
    if (fr.loss.total > kDivergenceFactor * initial) {
      throw NumericalError(fmt::format("train: loss {} at step {} exceeds 10x the initial loss {}", fr.loss.total,
                                       step, initial));
    }
    result.trace.push_back(fr.loss);
    if (config.learning_rate == 0.0) continue;
    const PredictorParams g = backward(result.params, batch, fr.cache);
    result.params.weight -= config.learning_rate * g.weight;
    result.params.bias -= config.learning_rate * g.bias;
  }
  return result;
}

std::string trace_csv(std::span<const LossBreakdown> trace) {
  std::string out = "step,loss,l_sa,l_cons,l_h\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const LossBreakdown& l = trace[i];
    out += fmt::format("{},{},{},{},{}\n", i, l.total, l.l_sa, l.l_cons, l.l_h);
  }
  return out;
}

std::string encode_params(const PredictorParams& params) {
  params.validate();
  std::string out(kPrm1Magic);
  detail::put_f64(out, params.channels());
  detail::put_f64(out, params.anchors());
  for (int ch = 0; ch < params.channels(); ++ch) {
    for (int a = 0; a < params.anchors(); ++a) detail::put_f64(out, params.weight(ch, a));
  }
  for (int a = 0; a < params.anchors(); ++a) detail::put_f64(out, params.bias[a]);
  return out;
}

PredictorParams decode_params(std::string_view bytes) {
  detail::ByteReader in(bytes, "PRM1");
  if (in.take(8) != kPrm1Magic) throw DataError("PRM1: bad magic");
  const auto dim = [&](const char* what) {
    const double v = in.f64();
    if (!(v >= 1.0 && v <= 65536.0) || v != std::floor(v)) throw DataError(fmt::format("PRM1: invalid {}", what));
    return static_cast<int>(v);
  };
  const int n_c = dim("channel count");
  const int n_a = dim("anchor count");
  const std::size_t expected = (static_cast<std::size_t>(n_c) * n_a + n_a) * 8;
  if (in.remaining() != expected) throw DataError("PRM1: payload size does not match the header");
  PredictorParams p = PredictorParams::zeros(n_c, n_a);
  for (int ch = 0; ch < n_c; ++ch) {
    for (int a = 0; a < n_a; ++a) p.weight(ch, a) = in.f64();
  }
  for (int a = 0; a < n_a; ++a) p.bias[a] = in.f64();
  if (!p.weight.allFinite() || !p.bias.allFinite()) throw DataError("PRM1: non-finite parameter");
  return p;
}

void write_params(const std::filesystem::path& path, const PredictorParams& params) {
  detail::write_file(path, encode_params(params));
}

PredictorParams read_params(const std::filesystem::path& path) { return decode_params(detail::read_file(path)); }

}  // namespace heightlab
