#include <benchmark/benchmark.h>

#include "patchforge/adv_loss.hpp"
#include "patchforge/metrics.hpp"
#include "patchforge/rng.hpp"

namespace {

using namespace patchforge;

LabelMap random_labels(std::size_t h, std::size_t w, int classes, std::uint64_t seed) {
  LabelMap l(h, w);
  Rng rng(seed);
  for (auto& v : l.values) v = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(classes)));
  return l;
}

void BM_UpdateConfusion(benchmark::State& state) {
  const LabelMap pred = random_labels(1024, 2048, 19, 1), label = random_labels(1024, 2048, 19, 2);
  ConfusionMatrix cm(19);
  for (auto _ : state) update_confusion(cm, pred, label, PixelRect{412, 924, 612, 1124}, 255);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * pred.size()));
}
BENCHMARK(BM_UpdateConfusion);

void BM_SpreadCounts(benchmark::State& state) {
  const LabelMap a = random_labels(1024, 2048, 19, 1), b = random_labels(1024, 2048, 19, 2);
  for (auto _ : state) benchmark::DoNotOptimize(spread_counts(a, b, PixelRect{412, 924, 612, 1124}, 32, 400));
}
BENCHMARK(BM_SpreadCounts);

void BM_MaskedCrossEntropyGrad(benchmark::State& state) {
  Tensor logits({6, 128, 256});
  Rng rng(3);
  for (double& v : logits.values()) v = rng.normal();
  const LabelMap label = random_labels(128, 256, 6, 4);
  const CorrectnessMask m = correctness_mask(logits, label, PixelRect{51, 115, 76, 140}, 255);
  for (auto _ : state) benchmark::DoNotOptimize(masked_cross_entropy_grad(logits, label, m));
}
BENCHMARK(BM_MaskedCrossEntropyGrad);

}  // namespace
