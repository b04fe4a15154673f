#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <random>

#include "heightlab/consistency.hpp"
#include "heightlab/error.hpp"
#include "heightlab/synth.hpp"
#include "oracles.hpp"

using namespace heightlab;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

HeightMap crest_map(const BevGrid& g, double amplitude, double wavelength) {
  return rasterize_surface(g, [&](double x, double y) {
    return amplitude * std::sin(2 * std::numbers::pi * y / wavelength) + 0.3 * amplitude * std::cos(0.2 * x);
  });
}

}  // namespace

TEST(RelativeTransform, IdenticalFramesIdentityMotion) {
  const RoadFrame f(RigidTransform::translation(0, -1.5, -1.2));
  EXPECT_LE(max_abs_difference(relative_transform(f, f, RigidTransform()), RigidTransform()), 1e-15);
}

TEST(RelativeTransform, ForwardMotionSlidesContentBackward) {
  const RoadFrame f(RigidTransform::translation(0, -1.5, 0));
  const RigidTransform motion = RigidTransform::translation(0, -1, 0);
  const RigidTransform t = relative_transform(f, f, motion);
  EXPECT_LE(max_abs_difference(t, RigidTransform::translation(0, -1, 0)), 1e-15);
}

TEST(RelativeTransform, YawBecomesRoadRotationAboutZ) {
  const RoadFrame f(RigidTransform::translation(0, -1.5, 0));
  const RigidTransform t = relative_transform(f, f, RigidTransform::rot_z(10 * kDeg));
  EXPECT_LE((t.rotation() - RigidTransform::rot_z(10 * kDeg).rotation()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RelativeTransform, IsExactThreeTermComposition) {
  std::mt19937_64 rng(20);
  const RoadFrame a(RigidTransform::rot_x(0.1));
  const RoadFrame b(compose(RigidTransform::translation(0.2, 0, 1), RigidTransform::rot_y(-0.05)));
  const RigidTransform motion = heightlab_test::random_transform(rng);
  const Eigen::Matrix4d expected =
      b.road_from_ego().matrix() * motion.matrix() * a.road_from_ego().matrix().inverse();
  EXPECT_LE((relative_transform(a, b, motion).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WarpHeightmap, IdentityReproducesInput) {
  const BevGrid g{30, 12, 0.5, -3.0, 0.0};
  std::mt19937_64 rng(21);
  const HeightMap h = heightlab_test::random_map(g, rng, -1, 1);
  const WarpResult w = warp_heightmap(h, RigidTransform(), g);
  EXPECT_EQ(w.overlap.count(), g.cell_count());
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) EXPECT_EQ(w.warped.at(r, c), h.at(r, c));
}

TEST(WarpHeightmap, OneCellForwardShift) {
  const BevGrid g{30, 12, 0.5, -3.0, 0.0};
  std::mt19937_64 rng(22);
  const HeightMap h = heightlab_test::random_map(g, rng, -1, 1);
  const WarpResult w = warp_heightmap(h, RigidTransform::translation(0, -0.5, 0), g);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (r == g.rows - 1) {
        EXPECT_FALSE(w.overlap.at(r, c));
        EXPECT_FALSE(w.warped.valid(r, c));
      } else {
        ASSERT_TRUE(w.overlap.at(r, c));
        EXPECT_NEAR(w.warped.at(r, c), h.at(r + 1, c), 1e-12);
      }
    }
  }
}

TEST(WarpHeightmap, FlatMapStaysFlatUnderPlanarMotion) {
  const BevGrid g;
  const HeightMap zero(g, 0.0);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> yaw(-0.3, 0.3), shift(-5, 5);
  for (int i = 0; i < 10; ++i) {
    const RigidTransform t = compose(RigidTransform::translation(shift(rng), shift(rng), 0), RigidTransform::rot_z(yaw(rng)));
    const WarpResult w = warp_heightmap(zero, t, g);
    EXPECT_GT(w.overlap.count(), 0u);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c)
        if (w.overlap.at(r, c)) EXPECT_NEAR(w.warped.at(r, c), 0.0, 1e-12);
  }
}

TEST(WarpHeightmap, VerticalOffsetAddsToHeight) {
  const BevGrid g{10, 10, 0.5, -2.5, 0.0};
  const HeightMap h = crest_map(g, 0.5, 20);
  const WarpResult w = warp_heightmap(h, RigidTransform::translation(0, 0, -0.25), g);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) EXPECT_NEAR(w.warped.at(r, c), h.at(r, c) - 0.25, 1e-12);
}

TEST(WarpHeightmap, SmallPitchMatchesRigidOracle) {
  // A level plane seen from a frame pitched by theta becomes z' = sin(theta) y_s + cos(theta) h.
  const BevGrid g{40, 8, 0.5, -2.0, 0.0};
  const HeightMap h(g, 0.4);
  const double theta = 0.02;
  const WarpResult w = warp_heightmap(h, RigidTransform::rot_x(theta), g);
  const RigidTransform inv = invert(RigidTransform::rot_x(theta));
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (!w.overlap.at(r, c)) continue;
      const Vec2 p = g.cell_center(r, c);
      const Vec3 src = inv.apply(Vec3(p.x(), p.y(), 0.0));
      EXPECT_NEAR(w.warped.at(r, c), std::sin(theta) * src.y() + std::cos(theta) * 0.4, 1e-12);
    }
  }
}

TEST(WarpHeightmap, NoDataSourcesLeaveOverlap) {
  const BevGrid g{10, 10, 1.0, 0.0, 0.0};
  HeightMap h(g, 1.0);
  h.set_nodata(5, 5);
  const WarpResult w = warp_heightmap(h, RigidTransform::translation(-0.5, 0, 0), g);
  // Target column c draws from source columns c and c + 1.
  EXPECT_FALSE(w.overlap.at(5, 4));
  EXPECT_FALSE(w.overlap.at(5, 5));
  EXPECT_TRUE(w.overlap.at(5, 6));
  EXPECT_TRUE(w.overlap.at(5, 3));
  EXPECT_TRUE(w.overlap.at(4, 5));
}

TEST(WarpHeightmap, RejectsSteepTilt) {
  const BevGrid g;
  const HeightMap h(g);
  EXPECT_THROW(warp_heightmap(h, RigidTransform::rot_x(46 * kDeg), g), NumericalError);
  EXPECT_THROW(warp_heightmap(h, RigidTransform::rot_y(-50 * kDeg), g), NumericalError);
  EXPECT_NO_THROW(warp_heightmap(h, RigidTransform::rot_x(40 * kDeg), g));
}

TEST(WarpHeightmap, EmptyOverlapIsTotal) {
  const BevGrid g;
  const HeightMap h(g, 0.3);
  const WarpResult w = warp_heightmap(h, RigidTransform::translation(0, -500, 0), g);
  EXPECT_EQ(w.overlap.count(), 0u);
  EXPECT_EQ(consistency_loss(w.warped, h, w.overlap), 0.0);
}

TEST(WarpHeightmap, RoundTripOnSmoothSurface) {
  const BevGrid g;
  const HeightMap h = crest_map(g, 0.5, 80);  // max slope well below 0.1
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> yaw(-0.05, 0.05), dx(-1, 1), dy(-3, 3);
  for (int i = 0; i < 10; ++i) {
    const RigidTransform t = compose(RigidTransform::translation(dx(rng), dy(rng), 0), RigidTransform::rot_z(yaw(rng)));
    const WarpResult fwd = warp_heightmap(h, t, g);
    const WarpResult back = warp_heightmap(fwd.warped, invert(t), g);
    std::size_t n = 0;
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        if (!back.overlap.at(r, c)) continue;
        ++n;
        EXPECT_LE(std::abs(back.warped.at(r, c) - h.at(r, c)), 1e-3);
      }
    }
    EXPECT_GT(n, g.cell_count() / 2);
  }
}

TEST(WarpStencil, ApplyMatchesDirectWarp) {
  const BevGrid g;
  std::mt19937_64 rng(25);
  const HeightMap h = heightlab_test::random_map(g, rng, -1, 1, 0.1);
  const RigidTransform t = compose(RigidTransform::translation(0.3, -1.1, 0.02), RigidTransform::rot_z(0.04));
  const WarpStencil st = build_warp_stencil(g, t, g);
  const WarpResult a = apply_warp(st, h), b = warp_heightmap(h, t, g);
  EXPECT_EQ(a.overlap.mask, b.overlap.mask);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (a.overlap.at(r, c)) EXPECT_EQ(a.warped.at(r, c), b.warped.at(r, c));
  EXPECT_THROW(apply_warp(st, HeightMap(BevGrid{10, 10, 0.5, 0, 0})), InvalidArgument);
}

TEST(ConsistencyLoss, Examples) {
  const BevGrid g{4, 4, 1.0, 0.0, 0.0};
  const HeightMap a(g, 0.2);
  OverlapMask full{4, 4, std::vector<std::uint8_t>(16, 1)};
  EXPECT_EQ(consistency_loss(a, a, full), 0.0);
  EXPECT_NEAR(consistency_loss(HeightMap(g, 0.3), a, full), 0.1, 1e-15);

  HeightMap b(g, 0.0);
  OverlapMask half{4, 4, std::vector<std::uint8_t>(16, 0)};
  for (int i = 0; i < 8; ++i) half.mask[i] = 1;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) b.set(r, c, r < 2 ? 0.4 : 7.0 + r * c);
  EXPECT_NEAR(consistency_loss(b, a, half), 0.2, 1e-15);

  OverlapMask none{4, 4, std::vector<std::uint8_t>(16, 0)};
  EXPECT_EQ(consistency_loss(b, a, none), 0.0);
}

TEST(ConsistencyLoss, StaticWorldBound) {
  SceneSpec spec;
  spec.surface_kind = SurfaceKind::grade;
  spec.params.grade = 0.06;
  spec.length = 5;
  const Scene scene = generate_scene(spec);
  const double bound = spec.grid.meters_per_pixel * scene.surface.max_gradient();
  for (int k = 1; k < spec.length; ++k) {
    const RigidTransform t = relative_transform(scene.frames[k - 1].pose.frame, scene.frames[k].pose.frame,
                                                scene.trajectory.ego_motion[k]);
    const WarpResult w = warp_heightmap(scene.frames[k - 1].ground_truth, t, spec.grid);
    EXPECT_GT(w.overlap.count(), spec.grid.cell_count() / 2);
    EXPECT_LE(consistency_loss(w.warped, scene.frames[k].ground_truth, w.overlap), bound);
  }
}
