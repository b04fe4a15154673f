#include <benchmark/benchmark.h>

#include <cmath>

#include "heightlab/consistency.hpp"

using namespace heightlab;

namespace {

HeightMap wavy_map(const BevGrid& g) {
  return rasterize_surface(g, [](double x, double y) { return 0.5 * std::sin(0.1 * y) + 0.1 * std::cos(0.3 * x); });
}

const RigidTransform kMotion = compose(RigidTransform::translation(0.2, -1.0, 0.01), RigidTransform::rot_z(0.02));

void BM_WarpHeightmap(benchmark::State& state) {
  const BevGrid g;
  const HeightMap h = wavy_map(g);
  for (auto _ : state) benchmark::DoNotOptimize(warp_heightmap(h, kMotion, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}
BENCHMARK(BM_WarpHeightmap)->Unit(benchmark::kMicrosecond);

void BM_BuildWarpStencil(benchmark::State& state) {
  const BevGrid g;
  for (auto _ : state) benchmark::DoNotOptimize(build_warp_stencil(g, kMotion, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}
BENCHMARK(BM_BuildWarpStencil)->Unit(benchmark::kMicrosecond);

void BM_ApplyWarpAndLoss(benchmark::State& state) {
  const BevGrid g;
  const HeightMap h = wavy_map(g);
  const WarpStencil stencil = build_warp_stencil(g, kMotion, g);
  for (auto _ : state) {
    const WarpResult w = apply_warp(stencil, h);
    benchmark::DoNotOptimize(consistency_loss(w.warped, h, w.overlap));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}
BENCHMARK(BM_ApplyWarpAndLoss)->Unit(benchmark::kMicrosecond);

}  // namespace
