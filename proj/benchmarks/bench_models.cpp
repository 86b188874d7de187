#include <benchmark/benchmark.h>

#include "patchforge/adv_loss.hpp"
#include "patchforge/model_zoo.hpp"
#include "patchforge/rng.hpp"

namespace {

using namespace patchforge;

Tensor batch(std::size_t b, std::size_t h, std::size_t w) {
  Tensor t({b, 3, h, w});
  Rng rng(1);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

ToyKind kind_arg(const benchmark::State& state) {
  return state.range(0) == 0 ? ToyKind::kTinyCnn : ToyKind::kTinyAttention;
}

void BM_ToyForward(benchmark::State& state) {
  ToyModel m({.kind = kind_arg(state)});
  m.set_inference_mode();
  const Tensor x = batch(1, 128, 256);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
  state.SetLabel(m.name());
}
BENCHMARK(BM_ToyForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ToyInputGradient(benchmark::State& state) {
  ToyModel m({.kind = kind_arg(state)});
  m.set_inference_mode();
  const Tensor x = batch(6, 128, 128);
  const std::vector<LabelMap> labels(6, LabelMap(128, 128, 0));
  const std::vector<std::optional<PixelRect>> regions(6, PixelRect{51, 51, 76, 76});
  const ScalarLossFn loss = [&](const Tensor& logits) {
    BatchLoss bl = adversarial_batch_loss(logits, labels, regions, 255);
    return LossValue{bl.value, std::move(bl.grad_logits)};
  };
  for (auto _ : state) benchmark::DoNotOptimize(m.input_gradient(x, loss));
  state.SetLabel(m.name() + " batch 6 x 128x128");
}
BENCHMARK(BM_ToyInputGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
