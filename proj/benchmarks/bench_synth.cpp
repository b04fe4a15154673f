#include <benchmark/benchmark.h>

#include "heightlab/synth.hpp"

using namespace heightlab;

namespace {

struct CrestSetup {
  SceneSpec spec;
  Surface surface{SurfaceKind::crest, {}};
  Trajectory trajectory;

  CrestSetup() {
    spec.surface_kind = SurfaceKind::crest;
    spec.params.amplitude = 1.0;
    spec.params.wavelength = 60.0;
    surface = gen_surface(spec);
    trajectory = gen_trajectory(spec, surface);
  }
};

void BM_RenderGroundMask(benchmark::State& state) {
  const CrestSetup s;
  const CameraModel cam = s.spec.rig.camera();
  for (auto _ : state)
    benchmark::DoNotOptimize(render_ground_mask(s.surface, s.trajectory.poses[0], cam, s.spec.grid));
  state.SetItemsProcessed(state.iterations() * cam.intrinsics().width * cam.intrinsics().height);
}
BENCHMARK(BM_RenderGroundMask)->Unit(benchmark::kMillisecond);

void BM_RenderFrame(benchmark::State& state) {
  const CrestSetup s;
  const CameraModel cam = s.spec.rig.camera();
  for (auto _ : state) {
    const FrameRender render = render_frame(s.surface, s.trajectory.poses[0], cam, s.spec.grid);
    benchmark::DoNotOptimize(render_feature_grid(render, s.spec.channels, 7, 0));
  }
}
BENCHMARK(BM_RenderFrame)->Unit(benchmark::kMillisecond);

void BM_HeightFromDepth(benchmark::State& state) {
  const CrestSetup s;
  const CameraModel cam = s.spec.rig.camera();
  const ScenePose& pose = s.trajectory.poses[0];
  const FrameRender render = render_frame(s.surface, pose, cam, s.spec.grid);
  for (auto _ : state)
    benchmark::DoNotOptimize(height_from_depth(render.depth, render.mask, pose.frame, cam, s.spec.grid));
}
BENCHMARK(BM_HeightFromDepth)->Unit(benchmark::kMillisecond);

}  // namespace
