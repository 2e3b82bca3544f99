// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <vector>

#include "dieclust/distance_matrix.hpp"
#include "dieclust/gp_keypoints.hpp"
#include "dieclust/imaging.hpp"
#include "dieclust/matching.hpp"
#include "dieclust/pipeline.hpp"
#include "dieclust/synth.hpp"

using namespace dieclust;

namespace {

WeightField relief(int size) {
  SyntheticBenchmarkSpec spec;
  spec.n_dies = 2;
  spec.fixed_sizes = {1, 1};
  spec.image_size = size;
  const auto img = generate_synthetic_benchmark(spec, 11).images.front().image;
  auto w = laplacian_relief(img);
  return apply_circular_mask(w, (size - 1) / 2.0, (size - 1) / 2.0, size * 0.45);
}

void BM_PriorField(benchmark::State& st) {
  const auto w = relief(static_cast<int>(st.range(0)));
  const auto cfg = KernelConfig::for_height(w.height());
  for (auto _ : st) benchmark::DoNotOptimize(prior_variance_field(w, cfg));
}

void BM_PriorFieldReference(benchmark::State& st) {
  const auto w = relief(static_cast<int>(st.range(0)));
  const auto cfg = KernelConfig::for_height(w.height());
  for (auto _ : st) benchmark::DoNotOptimize(prior_variance_field_reference(w, cfg));
}

BENCHMARK(BM_PriorField)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PriorFieldReference)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

struct Corpus {
  std::vector<ImageFeatures> features;
  MatchingConfig cfg;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    SyntheticBenchmarkSpec spec;
    spec.n_dies = 4;
    spec.fixed_sizes = {3, 3, 3, 3};
    spec.image_size = 128;
    const auto bench = generate_synthetic_benchmark(spec, 5);
    Corpus out;
    out.cfg = MatchingParams{}.config_for(spec.image_size);
    const auto k = GpConfig{}.kernel_for(spec.image_size);
    for (const auto& im : bench.images) {
      auto w = laplacian_relief(im.image);
      w = apply_circular_mask(w, 63.5, 63.5, 128 * 0.45);
      out.features.push_back(extract_features(im.image, select_keypoints(w, k, im.id), out.cfg));
    }
    return out;
  }();
  return c;
}

void BM_ScoreAllPairs(benchmark::State& st) {
  const auto& c = corpus();
  for (auto _ : st) benchmark::DoNotOptimize(score_all_pairs(c.features, c.cfg));
}

void BM_ScoreAllPairsSerial(benchmark::State& st) {
  const auto& c = corpus();
  for (auto _ : st) benchmark::DoNotOptimize(score_all_pairs_serial(c.features, c.cfg));
}

BENCHMARK(BM_ScoreAllPairs)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreAllPairsSerial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
