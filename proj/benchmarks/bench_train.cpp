#include <benchmark/benchmark.h>

#include "heightlab/synth.hpp"
#include "heightlab/toytrain.hpp"

using namespace heightlab;

namespace {

TrainBatch make_batch(int frames) {
  SceneSpec spec;
  spec.surface_kind = SurfaceKind::grade;
  spec.params.grade = 0.05;
  spec.length = frames;
  const Scene scene = generate_scene(spec);
  const SlopeAnchorSet anchors = make_anchor_set(spec.grid, default_slopes());
  return TrainBatch{anchors, {sequence_from_scene(scene, anchors, 0, frames)}};
}

PredictorParams seeded_params() {
  TrainConfig c;
  c.seed = 3;
  c.init_scale = 0.5;
  return initial_params(c, 8, 5);
}

void BM_ForwardLoss(benchmark::State& state) {
  const TrainBatch batch = make_batch(static_cast<int>(state.range(0)));
  const PredictorParams p = seeded_params();
  for (auto _ : state) benchmark::DoNotOptimize(forward_loss(p, batch, LossWeights{}));
  state.SetItemsProcessed(state.iterations() * batch.frame_count());
}
BENCHMARK(BM_ForwardLoss)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
  const TrainBatch batch = make_batch(static_cast<int>(state.range(0)));
  const PredictorParams p = seeded_params();
  const ForwardResult fwd = forward_loss(p, batch, LossWeights{});
  for (auto _ : state) benchmark::DoNotOptimize(backward(p, batch, fwd.cache));
  state.SetItemsProcessed(state.iterations() * batch.frame_count());
}
BENCHMARK(BM_Backward)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
