#include <benchmark/benchmark.h>

#include "patchforge/rng.hpp"
#include "patchforge/transforms.hpp"

namespace {

using namespace patchforge;

void BM_ResizeBilinear(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Tensor img({3, side, 2 * side}, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(resize_bilinear(img, 2 * side, 4 * side));
}
BENCHMARK(BM_ResizeBilinear)->Arg(128)->Arg(512);

void BM_ResizeNearest(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const LabelMap lab(side, 2 * side, 3);
  for (auto _ : state) benchmark::DoNotOptimize(resize_nearest(lab, 2 * side, 4 * side));
}
BENCHMARK(BM_ResizeNearest)->Arg(128)->Arg(512);

void BM_SampleAndApplyTransform(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const TransformConfig cfg{.crop_size = side};
  const Tensor img({3, side, 2 * side}, 0.5);
  const LabelMap lab(side, 2 * side, 1);
  Rng rng(7);
  for (auto _ : state) {
    const TransformSpec t = sample_transform(rng, cfg, side, 2 * side);
    benchmark::DoNotOptimize(apply_transform(img, lab, t, cfg));
  }
}
BENCHMARK(BM_SampleAndApplyTransform)->Arg(128)->Arg(512);

}  // namespace
