#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace heightlab_test {

using namespace heightlab;

namespace {

std::int32_t sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

// Flattened frames and pairs in batch order, matching the forward cache.
void collect(const TrainBatch& batch, std::vector<const TrainFrame*>& frames, std::vector<std::size_t>& pair_curr) {
  for (const TrainSequence& s : batch.sequences) {
    const std::size_t base = frames.size();
    for (const TrainFrame& f : s.frames) frames.push_back(&f);
    for (std::size_t k = 0; k < s.warps.size(); ++k) pair_curr.push_back(base + k + 1);
  }
}

}  // namespace

std::vector<std::int32_t> kink_signature(const TrainBatch& batch, const ForwardCache& cache) {
  std::vector<const TrainFrame*> frames;
  std::vector<std::size_t> pair_curr;
  collect(batch, frames, pair_curr);
  std::vector<std::int32_t> sig;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const TrainFrame& f = *frames[i];
    for (double raw : cache.footprint[i].data()) sig.push_back(raw > 1.0);
    const HeightMap& h = cache.height[i];
    const RigidTransform cam_from_road = camera_from_road(f.camera, f.frame);
    const Intrinsics& k = f.camera.intrinsics();
    for (int r = 0; r < h.rows(); ++r) {
      for (int c = 0; c < h.cols(); ++c) {
        if (!h.valid(r, c)) continue;
        const Vec2 xy = h.grid().cell_center(r, c);
        const Vec3 p = cam_from_road.apply(Vec3(xy.x(), xy.y(), h.at(r, c)));
        if (p.z() <= kDepthEpsilon) {
          sig.push_back(-1);
          continue;
        }
        sig.push_back(static_cast<std::int32_t>(std::floor(k.fx * p.x() / p.z() + k.cx)));
        sig.push_back(static_cast<std::int32_t>(std::floor(k.fy * p.y() / p.z() + k.cy)));
        if (f.ground_truth.valid(r, c)) sig.push_back(sign_of(h.at(r, c) - f.ground_truth.at(r, c)));
      }
    }
  }
  for (std::size_t p = 0; p < cache.warped.size(); ++p) {
    const WarpResult& w = cache.warped[p];
    const HeightMap& target =
        cache.consistency_against_gt ? frames[pair_curr[p]]->ground_truth : cache.height[pair_curr[p]];
    for (int r = 0; r < target.rows(); ++r)
      for (int c = 0; c < target.cols(); ++c)
        if (w.overlap.at(r, c)) sig.push_back(sign_of(w.warped.at(r, c) - target.at(r, c)));
  }
  return sig;
}

std::vector<CoordinateCheck> gradient_check(const PredictorParams& params, const TrainBatch& batch,
                                            const LossWeights& weights, double step) {
  PredictorParams p = params;
  const ForwardResult base = forward_loss(p, batch, weights);
  const PredictorParams grad = backward(p, batch, base.cache);
  const std::vector<std::int32_t> sig0 = kink_signature(batch, base.cache);
  std::vector<CoordinateCheck> out;
  const auto probe = [&](CoordinateCheck check, double& slot, double analytic) {
    const double x0 = slot;
    double h = step;
    for (int halving = 0; halving <= kMaxStepHalvings; ++halving, h *= 0.5) {
      slot = x0 + h;
      const ForwardResult plus = forward_loss(p, batch, weights);
      slot = x0 - h;
      const ForwardResult minus = forward_loss(p, batch, weights);
      slot = x0;
      check.step = h;
      check.numeric = (plus.loss.total - minus.loss.total) / (2.0 * h);
      check.smooth = kink_signature(batch, plus.cache) == sig0 && kink_signature(batch, minus.cache) == sig0;
      if (check.smooth) break;
    }
    check.analytic = analytic;
    check.rel_error = std::abs(check.numeric - analytic) /
                      std::max({std::abs(check.numeric), std::abs(analytic), kGradRelFloor});
    out.push_back(check);
  };
  for (int ch = 0; ch < p.channels(); ++ch)
    for (int a = 0; a < p.anchors(); ++a) probe({false, ch, a}, p.weight(ch, a), grad.weight(ch, a));
  for (int a = 0; a < p.anchors(); ++a) probe({true, 0, a}, p.bias[a], grad.bias[a]);
  return out;
}

}  // namespace heightlab_test
