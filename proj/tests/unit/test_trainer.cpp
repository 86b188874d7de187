#include <gtest/gtest.h>

#include <cmath>

#include "patchforge/datasets.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/model_zoo.hpp"
#include "patchforge/trainer.hpp"
#include "test_support.hpp"

namespace patchforge {
namespace {

using testing::NearestColorAdapter;

class EmptyData final : public Dataset {
 public:
  std::size_t size() const override { return 0; }
  SampleRecord get(std::size_t) const override { throw std::out_of_range("empty"); }
  int num_classes() const override { return 2; }
  std::int32_t ignore_index() const override { return 255; }
  std::vector<std::string> class_names() const override { return {"a", "b"}; }
};

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.patch_size = 6;
  cfg.transform = {.crop_size = 24};
  cfg.eval_subset = 3;
  return cfg;
}

NearestColorAdapter palette_adapter() {
  std::vector<std::array<double, 3>> centres{{0.45, 0.45, 0.45}};
  for (int k = 1; k < 6; ++k) centres.push_back(SynthShapesDataset::color_for_class(k));
  return NearestColorAdapter("nearest", centres);
}

TEST(AscentStep, SignOfZeroIsZeroAndClips) {
  const Patch p(1, 2, {0.0f, 0.5f, 1.0f, 0.998f, 0.002f, 0.3f});
  Tensor g({3, 1, 2}, std::vector<double>{-1.0, 0.0, 1.0, 5.0, -1e-30, 0.0});
  const Patch q = ascent_step(p, g, 0.005);
  EXPECT_EQ(q.values()[0], 0.0f);
  EXPECT_EQ(q.values()[1], 0.5f);
  EXPECT_EQ(q.values()[2], 1.0f);
  EXPECT_EQ(q.values()[3], 1.0f);
  EXPECT_EQ(q.values()[4], 0.0f);
  EXPECT_EQ(q.values()[5], 0.3f);
  EXPECT_EQ(ascent_step(p, Tensor({3, 1, 2}, 0.0), 0.005), p);
}

TEST(AscentStep, StepMagnitudeIsExact) {
  const Patch p = random_patch(4, 4, 1);
  Tensor g({3, 4, 4});
  Rng rng(2);
  for (double& v : g.values()) v = rng.normal();
  const Patch q = ascent_step(p, g, 0.01);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const float want = std::clamp(static_cast<float>(double(p.values()[i]) + 0.01 * (g[i] > 0 ? 1 : -1)), 0.0f, 1.0f);
    EXPECT_EQ(q.values()[i], want);
  }
}

TEST(AscentStep, RejectsBadGradients) {
  const Patch p = random_patch(2, 2, 1);
  EXPECT_THROW(ascent_step(p, Tensor({3, 2, 3}), 0.01), ShapeMismatch);
  Tensor g({3, 2, 2});
  g[5] = std::nan("");
  EXPECT_THROW(ascent_step(p, g, 0.01), NonFiniteGradient);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg = small_config();
  cfg.step_size = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.patch_size = 25;
  EXPECT_THROW(cfg.validate(), PatchTooLarge);
  cfg = small_config();
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(small_config().validate());
}

TEST(TrainPatch, ZeroEpochsReturnsInitialPatch) {
  const auto adapter = palette_adapter();
  const SynthShapesDataset ds = synth_shapes(4, 24, 32, 6, 1);
  TrainConfig cfg = small_config();
  cfg.epochs = 0;
  const TrainResult r = train_patch(adapter, ds, cfg);
  EXPECT_TRUE(std::equal(r.patch.values().begin(), r.patch.values().end(), init_patch(cfg, cfg.seed).values().begin()));
  ASSERT_EQ(r.history.records.size(), 1u);
  EXPECT_EQ(r.history.records[0].epoch, 0);
  EXPECT_FALSE(r.history.records[0].mean_loss.has_value());
  EXPECT_TRUE(r.history.records[0].eval_miou.has_value());
  EXPECT_EQ(r.patch.meta().train_epochs, 0);
}

TEST(TrainPatch, PerPixelModelLeavesPatchUntouched) {
  // The patch pixels are excluded from the loss and a per-pixel model has no
  // path from them to any other pixel, so every gradient is exactly zero.
  const auto adapter = palette_adapter();
  const SynthShapesDataset ds = synth_shapes(5, 24, 32, 6, 2);
  const TrainConfig cfg = small_config();
  const TrainResult r = train_patch(adapter, ds, cfg);
  EXPECT_TRUE(std::equal(r.patch.values().begin(), r.patch.values().end(), init_patch(cfg, cfg.seed).values().begin()));
  ASSERT_EQ(r.history.records.size(), 3u);
  EXPECT_TRUE(r.history.records[1].mean_loss.has_value());
}

TEST(TrainPatch, ToyModelRunIsDeterministicAndFrozen) {
  ToyModel model({.kind = ToyKind::kTinyCnn, .seed = 4});
  model.set_inference_mode();
  const auto checksum = model.parameter_checksum();
  const SynthShapesDataset ds = synth_shapes(4, 24, 32, 6, 3);
  const TrainConfig cfg = small_config();

  std::size_t steps = 0;
  std::vector<int> epochs;
  TrainHooks hooks;
  hooks.check_invariants = true;
  hooks.on_step = [&](const StepEvent& e) {
    ++steps;
    for (std::size_t i = 0; i < e.before.size(); ++i) {
      EXPECT_LE(std::abs(e.after.values()[i] - e.before.values()[i]), cfg.step_size + 1e-6);
    }
  };
  hooks.on_epoch = [&](const EpochRecord& rec, const Patch&) { epochs.push_back(rec.epoch); };

  const TrainResult a = train_patch(model, ds, cfg, hooks);
  const TrainResult b = train_patch(model, ds, cfg);
  EXPECT_EQ(model.parameter_checksum(), checksum);
  EXPECT_TRUE(std::equal(a.patch.values().begin(), a.patch.values().end(), b.patch.values().begin()));
  EXPECT_FALSE(std::equal(a.patch.values().begin(), a.patch.values().end(), init_patch(cfg, cfg.seed).values().begin()));
  EXPECT_EQ(steps, 4u);  // 2 epochs x ceil(4 / 3) batches
  EXPECT_EQ(epochs, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(a.patch.meta().source_model, "tiny_cnn");
  EXPECT_EQ(a.patch.meta().train_epochs, 2);
  EXPECT_EQ(a.history.model, "tiny_cnn");
  EXPECT_EQ(a.history.class_names, ds.class_names());

  TrainConfig other = cfg;
  other.seed = 1;
  const TrainResult c = train_patch(model, ds, other);
  EXPECT_FALSE(std::equal(a.patch.values().begin(), a.patch.values().end(), c.patch.values().begin()));
}

TEST(TrainPatch, EvalEverySkipsIntermediateEpochs) {
  const auto adapter = palette_adapter();
  const SynthShapesDataset ds = synth_shapes(3, 24, 32, 6, 2);
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.eval_every = 2;
  const TrainResult r = train_patch(adapter, ds, cfg);
  ASSERT_EQ(r.history.records.size(), 4u);
  EXPECT_TRUE(r.history.records[0].eval_miou);
  EXPECT_FALSE(r.history.records[1].eval_miou);
  EXPECT_TRUE(r.history.records[2].eval_miou);
  EXPECT_TRUE(r.history.records[3].eval_miou);  // last epoch always evaluated
}

TEST(TrainPatch, RejectsBadInputs) {
  const SynthShapesDataset ds = synth_shapes(2, 24, 32, 6, 2);
  ToyModel training_mode({.kind = ToyKind::kTinyCnn});
  EXPECT_THROW(train_patch(training_mode, ds, small_config()), StateError);
  const auto adapter = palette_adapter();
  EXPECT_THROW(train_patch(adapter, EmptyData{}, small_config()), EmptyDataset);
}

}  // namespace
}  // namespace patchforge
