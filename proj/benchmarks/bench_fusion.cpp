#include <benchmark/benchmark.h>

#include <random>

#include "heightlab/fusion.hpp"
#include "heightlab/synth.hpp"

using namespace heightlab;

namespace {

struct FusionSetup {
  SceneSpec spec;
  Scene scene;
  SlopeAnchorSet anchors;

  FusionSetup() : scene(generate_scene(spec)), anchors(make_anchor_set(spec.grid, default_slopes())) {}

  const RoadFrame& frame() const { return scene.frames[0].pose.frame; }
  const FeatureGrid& image() const { return scene.frames[0].features; }
};

void BM_ProjectAndSample(benchmark::State& state) {
  const FusionSetup s;
  for (auto _ : state) benchmark::DoNotOptimize(project_and_sample(s.anchors, s.frame(), s.scene.camera, s.image()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.spec.grid.cell_count()) * s.anchors.size());
}
BENCHMARK(BM_ProjectAndSample)->Unit(benchmark::kMillisecond);

void BM_SoftmaxAndFuse(benchmark::State& state) {
  const FusionSetup s;
  const SampledAnchors sampled = project_and_sample(s.anchors, s.frame(), s.scene.camera, s.image());
  const BevGrid& g = s.spec.grid;
  AnchorLogits logits(s.anchors.size(), g.rows, g.cols);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int a = 0; a < logits.anchors(); ++a)
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) logits.at(a, r, c) = n(rng);
  mask_invalid_anchors(logits, sampled);
  for (auto _ : state) {
    const WeightField w = softmax_weights(logits, g);
    benchmark::DoNotOptimize(fuse_features(sampled.features, w));
    benchmark::DoNotOptimize(confidence_heightmap(s.anchors, w));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.cell_count()));
}
BENCHMARK(BM_SoftmaxAndFuse)->Unit(benchmark::kMillisecond);

}  // namespace
