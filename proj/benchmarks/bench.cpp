// Hot-path timings at the default working resolution (416x128). Fixtures are
// rendered once per benchmark registration and reused across iterations.

#include <benchmark/benchmark.h>

#include "warpgeo/consistency.hpp"
#include "warpgeo/losses.hpp"
#include "warpgeo/optimizer.hpp"
#include "warpgeo/sampling.hpp"
#include "warpgeo/scene.hpp"

using namespace warpgeo;

namespace {

const RenderedSequence& fixture() {
  static const RenderedSequence seq =
      make_sequence(scene_preset("slanted", 416, 128));
  return seq;
}

Twist small_motion() {
  Twist xi;
  xi << 0.002, -0.001, 0.0005, 0.05, -0.02, 0.01;
  return xi;
}

void bm_warp_coords(benchmark::State& state) {
  const RenderedSequence& seq = fixture();
  const PoseSE3 T = se3_exp(small_motion());
  for (auto _ : state) {
    WarpField wf = warp_coords(seq.depth_gt, T, seq.data.K);
    benchmark::DoNotOptimize(wf.coords.data());
  }
}
BENCHMARK(bm_warp_coords)->Unit(benchmark::kMillisecond);

void bm_bilinear_sample(benchmark::State& state) {
  const RenderedSequence& seq = fixture();
  const WarpField wf =
      warp_coords(seq.depth_gt, se3_exp(small_motion()), seq.data.K);
  for (auto _ : state) {
    SampledImage synth = bilinear_sample(seq.data.sources[0], wf.coords);
    benchmark::DoNotOptimize(synth.data());
  }
}
BENCHMARK(bm_bilinear_sample)->Unit(benchmark::kMillisecond);

void bm_consistency_layers(benchmark::State& state) {
  const RenderedSequence& seq = fixture();
  const EdgeWeights W = edge_weights(grayscale(seq.data.target), 0.1);
  for (auto _ : state) {
    NormalMap N = depth_to_normal(seq.depth_gt, seq.data.K, W);
    ScalarField Dn = normal_to_depth(seq.depth_gt, N, seq.data.K, W);
    benchmark::DoNotOptimize(Dn.data());
  }
}
BENCHMARK(bm_consistency_layers)->Unit(benchmark::kMillisecond);

void bm_total_objective(benchmark::State& state) {
  const RenderedSequence& seq = fixture();
  OptimConfig cfg;
  cfg.objective.scales = 4;
  OptimState st = init_state(seq, InitStrategy::kGroundTruth, cfg);
  SceneVariables vars{st.depth(), st.mask_logits, st.twists};
  const SequencePyramid pyr = build_pyramid(seq.data, cfg.objective);
  for (auto _ : state) {
    LossReport rep = total_objective(pyr, vars, cfg.objective);
    benchmark::DoNotOptimize(rep.total);
  }
}
BENCHMARK(bm_total_objective)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
