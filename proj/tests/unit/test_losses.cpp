#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <random>

#include "heightlab/error.hpp"
#include "heightlab/losses.hpp"
#include "oracles.hpp"

using namespace heightlab;

namespace {

CameraModel camera() { return CameraModel({160.0, 160.0, 160.0, 80.0, 320, 160}, camera_mount(1.5, 0.0, 0.0)); }

RoadFrame frame_of(const CameraModel& cam) { return road_frame_from_camera(cam, 1.5, 0.0); }

GroundMask mask_from(const FeatureGrid& f) {
  GroundMask m(f.rows(), f.cols());
  for (int r = 0; r < f.rows(); ++r)
    for (int c = 0; c < f.cols(); ++c) m.at(r, c) = f.at(r, c) > 0.5 ? 1 : 0;
  return m;
}

}  // namespace

TEST(LossWeights, DefaultsAndValidation) {
  const LossWeights w;
  EXPECT_EQ(w.lambda_sa, 5.0);
  EXPECT_EQ(w.lambda_cons, 2.0);
  EXPECT_EQ(w.lambda_h, 10.0);
  EXPECT_THROW((LossWeights{-1.0, 0.0, 0.0}.validate()), InvalidArgument);
  EXPECT_THROW((LossWeights{0.0, std::numeric_limits<double>::quiet_NaN(), 0.0}.validate()), InvalidArgument);
}

TEST(ProjectConfidence, FlatMapLandsBelowHorizon) {
  const CameraModel cam = camera();
  const HeightMap zero(BevGrid{}, 0.0);
  const std::vector<double> conf(zero.grid().cell_count(), 1.0);
  const FeatureGrid f = project_confidence_to_image(zero, conf, frame_of(cam), cam);
  double mass_below = 0.0;
  for (int r = 0; r < f.rows(); ++r) {
    for (int c = 0; c < f.cols(); ++c) {
      EXPECT_GE(f.at(r, c), 0.0);
      EXPECT_LE(f.at(r, c), 1.0);
      if (r <= 80) {
        EXPECT_EQ(f.at(r, c), 0.0) << r << " " << c;  // horizon row of a level camera is cy = 80
      } else {
        mass_below += f.at(r, c);
      }
    }
  }
  EXPECT_GT(mass_below, 100.0);
}

TEST(ProjectConfidence, BehindCameraGivesEmptyRaster) {
  const CameraModel cam = camera();
  const BevGrid g{10, 10, 0.5, -2.5, -20.0};  // entirely behind the camera
  const HeightMap h(g, 0.0);
  const std::vector<double> conf(g.cell_count(), 1.0);
  const FeatureGrid f = project_confidence_to_image(h, conf, frame_of(cam), cam);
  for (double v : f.data()) EXPECT_EQ(v, 0.0);
}

TEST(ProjectConfidence, SingleCellSplatsIntoFourPixels) {
  const CameraModel cam = camera();
  const RoadFrame frame = frame_of(cam);
  const BevGrid g{1, 1, 0.5, 0.3, 10.1};
  HeightMap h(g, 0.12);
  const std::vector<double> conf{0.8};
  const FeatureGrid f = project_confidence_to_image(h, conf, frame, cam);

  const Vec2 xy = g.cell_center(0, 0);
  const Eigen::Vector4d pc =
      cam.camera_from_ego().matrix() * frame.road_from_ego().matrix().inverse() * Eigen::Vector4d(xy.x(), xy.y(), 0.12, 1);
  const Eigen::Vector2d uv = heightlab_test::pinhole(160, 160, 160, 80, pc.head<3>());
  const int c0 = static_cast<int>(std::floor(uv.x())), r0 = static_cast<int>(std::floor(uv.y()));
  const double a = uv.x() - c0, b = uv.y() - r0;
  int nonzero = 0;
  for (int r = 0; r < f.rows(); ++r) {
    for (int c = 0; c < f.cols(); ++c) {
      double expected = 0.0;
      if (r == r0 && c == c0) expected = (1 - a) * (1 - b) * 0.8;
      if (r == r0 && c == c0 + 1) expected = a * (1 - b) * 0.8;
      if (r == r0 + 1 && c == c0) expected = (1 - a) * b * 0.8;
      if (r == r0 + 1 && c == c0 + 1) expected = a * b * 0.8;
      EXPECT_NEAR(f.at(r, c), expected, 1e-12);
      if (f.at(r, c) != 0.0) ++nonzero;
    }
  }
  EXPECT_LE(nonzero, 4);
  EXPECT_GE(nonzero, 1);
}

TEST(ProjectConfidence, WeightFieldOverloadUsesMaxWeight) {
  const CameraModel cam = camera();
  const BevGrid g{20, 10, 0.5, -2.5, 5.0};
  const SlopeAnchorSet anchors = make_anchor_set(g, default_slopes());
  AnchorLogits l(5, g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) l.at(2, r, c) = 0.01 * (r + c);
  const WeightField w = softmax_weights(l, g);
  const HeightMap h = confidence_heightmap(anchors, w);
  std::vector<double> conf;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) conf.push_back(w.max_weight(r, c));
  const FeatureGrid a = project_confidence_to_image(h, w, frame_of(cam), cam);
  const FeatureGrid b = project_confidence_to_image(h, conf, frame_of(cam), cam);
  for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
}

TEST(ProjectConfidence, ClampsAccumulatedMass) {
  const CameraModel cam = camera();
  const BevGrid g{4, 4, 0.05, 0.0, 10.0};  // many cells per pixel
  const HeightMap h(g, 0.0);
  const std::vector<double> conf(g.cell_count(), 1.0);
  const FeatureGrid raw = splat_confidence(h, conf, frame_of(cam), cam);
  const FeatureGrid clamped = project_confidence_to_image(h, conf, frame_of(cam), cam);
  double max_raw = 0.0;
  for (double v : raw.data()) max_raw = std::max(max_raw, v);
  EXPECT_GT(max_raw, 1.0);
  for (std::size_t i = 0; i < raw.data().size(); ++i) EXPECT_EQ(clamped.data()[i], std::min(raw.data()[i], 1.0));
}

TEST(SplatStencil, BorderBehaviour) {
  EXPECT_FALSE(splat_stencil(10, 10, -1.0, 5.0).active);
  EXPECT_FALSE(splat_stencil(10, 10, 5.0, 10.0).active);
  const SplatStencil s = splat_stencil(10, 10, -0.5, 9.5);
  ASSERT_TRUE(s.active);
  FeatureGrid f(10, 10, 1);
  splat(f, s, 1.0);
  EXPECT_DOUBLE_EQ(f.at(9, 0), 0.25);  // only one of four neighbours is inside
  double total = 0.0;
  for (double v : f.data()) total += v;
  EXPECT_DOUBLE_EQ(total, 0.25);
}

TEST(IouLoss, Examples) {
  FeatureGrid f(4, 4, 1);
  for (int r = 2; r < 4; ++r)
    for (int c = 0; c < 4; ++c) f.at(r, c) = 1.0;
  const GroundMask m = mask_from(f);
  EXPECT_EQ(iou_loss_sa(f, m), 0.0);

  FeatureGrid disjoint(4, 4, 1);
  disjoint.at(0, 0) = 0.7;
  EXPECT_EQ(iou_loss_sa(disjoint, m), 1.0);

  FeatureGrid half = f;
  for (double& v : half.data()) v *= 0.5;
  EXPECT_DOUBLE_EQ(iou_loss_sa(half, m), 0.5);
}

TEST(IouLoss, HardThreshold) {
  FeatureGrid f(1, 4, 1);
  f.at(0, 0) = 0.6;
  f.at(0, 1) = 0.4;
  GroundMask m(1, 4);
  m.at(0, 0) = 1;
  m.at(0, 1) = 1;
  EXPECT_DOUBLE_EQ(iou_loss_sa(f, m, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(iou_loss_sa(f, m), 0.5);
  EXPECT_DOUBLE_EQ(iou_loss_sa(f, m, 0.3), 0.0);
}

TEST(IouLoss, Errors) {
  const FeatureGrid empty(3, 3, 1);
  EXPECT_THROW(iou_loss_sa(empty, GroundMask(3, 3)), DataError);
  EXPECT_THROW(iou_loss_sa(empty, GroundMask(3, 4)), InvalidArgument);
}

TEST(IouLoss, RangeSymmetryAndZeroIffEqual) {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> val(0, 1);
  std::bernoulli_distribution bit(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    FeatureGrid a(8, 8, 1), b(8, 8, 1);
    GroundMask ma(8, 8), mb(8, 8);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        ma.at(r, c) = bit(rng);
        mb.at(r, c) = bit(rng);
        a.at(r, c) = ma.at(r, c);
        b.at(r, c) = mb.at(r, c);
      }
    }
    ma.at(0, 0) = mb.at(0, 0) = 1;
    a.at(0, 0) = b.at(0, 0) = 1;
    const double ab = iou_loss_sa(a, mb), ba = iou_loss_sa(b, ma);
    EXPECT_DOUBLE_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(ab == 0.0, ma.data().size() == mb.data().size() &&
                             std::equal(ma.data().begin(), ma.data().end(), mb.data().begin()));

    FeatureGrid soft(8, 8, 1);
    for (double& v : soft.data()) v = val(rng);
    const double l = iou_loss_sa(soft, ma);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 1.0);
  }
}

TEST(HeightL1, Examples) {
  const BevGrid g{2, 1, 1.0, 0.0, 0.0};
  const HeightMap a(g, 1.0);
  EXPECT_EQ(height_l1(a, a), 0.0);
  EXPECT_NEAR(height_l1(HeightMap(g, 1.05), a), 0.05, 1e-15);
  HeightMap b(g);
  b.set(0, 0, 1.1);
  b.set(1, 0, 0.7);
  EXPECT_NEAR(height_l1(b, a), 0.2, 1e-15);
}

TEST(HeightL1, JointValidityAndErrors) {
  const BevGrid g{1, 2, 1.0, 0.0, 0.0};
  HeightMap a(g, 0.0), b(g, 1.0);
  b.set_nodata(0, 0);
  EXPECT_EQ(height_l1(a, b), 1.0);
  a.set_nodata(0, 1);
  EXPECT_THROW(height_l1(a, b), DataError);
  EXPECT_THROW(height_l1(HeightMap(BevGrid{1, 3, 1.0, 0, 0}), b), InvalidArgument);
}

TEST(HeightL1, TriangleInequality) {
  const BevGrid g{20, 20, 0.5, 0, 0};
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    const HeightMap a = heightlab_test::random_map(g, rng, -1, 1);
    const HeightMap b = heightlab_test::random_map(g, rng, -1, 1);
    const HeightMap c = heightlab_test::random_map(g, rng, -1, 1);
    EXPECT_LE(height_l1(a, c), height_l1(a, b) + height_l1(b, c) + 1e-12);
  }
}

TEST(TotalLoss, Examples) {
  EXPECT_EQ(total_loss(0, 0, 0), 0.0);
  EXPECT_NEAR(total_loss(0.1, 0.05, 0.02), 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(total_loss(0.3, 0.4, 0.5, LossWeights{1, 1, 1}), 1.2);
  EXPECT_THROW(total_loss(1, 1, 1, LossWeights{1, -1, 1}), InvalidArgument);
}

TEST(TotalLoss, LinearInEachComponent) {
  const LossWeights w{1.5, 0.25, 3.0};
  const double base = total_loss(0.2, 0.3, 0.4, w);
  EXPECT_NEAR(total_loss(0.2 + 0.1, 0.3, 0.4, w) - base, 0.1 * 1.5, 1e-15);
  EXPECT_NEAR(total_loss(0.2, 0.3 + 0.1, 0.4, w) - base, 0.1 * 0.25, 1e-15);
  EXPECT_NEAR(total_loss(0.2, 0.3, 0.4 + 0.1, w) - base, 0.1 * 3.0, 1e-15);
}
