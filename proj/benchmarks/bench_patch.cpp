#include <benchmark/benchmark.h>

#include "patchforge/patch.hpp"
#include "patchforge/rng.hpp"
#include "patchforge/trainer.hpp"

namespace {

using namespace patchforge;

Tensor noise_image(std::size_t h, std::size_t w) {
  Tensor t({3, h, w});
  Rng rng(1);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

void BM_ApplyPatch(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor img = noise_image(side, 2 * side);
  const Patch p = random_patch(side / 5, side / 5, 2);
  for (auto _ : state) benchmark::DoNotOptimize(apply_patch(img, p));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * img.size() * sizeof(double)));
}
BENCHMARK(BM_ApplyPatch)->Arg(128)->Arg(512)->Arg(1024);

void BM_PastePatchInPlace(benchmark::State& state) {
  Tensor img = noise_image(1024, 2048);
  const Patch p = random_patch(200, 200, 2);
  for (auto _ : state) benchmark::DoNotOptimize(paste_patch(img, p));
}
BENCHMARK(BM_PastePatchInPlace);

void BM_AscentStep(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Patch p = random_patch(side, side, 3);
  Tensor g({3, side, side});
  Rng rng(4);
  for (double& v : g.values()) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(ascent_step(p, g, 0.005));
}
BENCHMARK(BM_AscentStep)->Arg(25)->Arg(200);

}  // namespace
