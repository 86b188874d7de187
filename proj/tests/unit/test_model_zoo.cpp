#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "patchforge/datasets.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/metrics.hpp"
#include "patchforge/model_zoo.hpp"
#include "test_support.hpp"

namespace patchforge {
namespace {

using testing::random_image;
using testing::TempDir;

Tensor batch_of(std::initializer_list<Tensor> images) {
  const std::vector<Tensor> v(images);
  return Tensor::stack(v);
}

// loss = sum(w * logits) with fixed pseudo-random weights.
ScalarLossFn linear_loss(std::uint64_t seed) {
  return [seed](const Tensor& logits) {
    Rng rng(seed);
    LossValue lv{0.0, Tensor(logits.shape())};
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double w = rng.normal();
      lv.value += w * logits[i];
      lv.grad_logits[i] = w;
    }
    return lv;
  };
}

class ToyKinds : public ::testing::TestWithParam<ToyKind> {};

TEST_P(ToyKinds, ForwardShapeMatchesInputIncludingOddSizes) {
  ToyModel m({.kind = GetParam(), .num_classes = 4, .width = 8});
  const Tensor out = m.forward(batch_of({random_image(13, 21, 1), random_image(13, 21, 2)}));
  EXPECT_EQ(out.shape(), (std::vector<std::size_t>{2, 4, 13, 21}));
  for (double v : out.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST_P(ToyKinds, InputGradientMatchesFiniteDifference) {
  ToyModel m({.kind = GetParam(), .num_classes = 3, .width = 8, .seed = 5});
  m.set_inference_mode();
  const Tensor x = batch_of({random_image(12, 20, 3)});
  const auto loss = linear_loss(9);
  const Tensor g = m.input_gradient(x, loss);
  ASSERT_EQ(g.shape(), x.shape());
  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); i += 37) {
    Tensor a = x, b = x;
    a[i] += h;
    b[i] -= h;
    const double fd = (loss(m.forward(a)).value - loss(m.forward(b)).value) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "index " << i;
  }
}

TEST_P(ToyKinds, ParameterGradientMatchesFiniteDifference) {
  ToyModel m({.kind = GetParam(), .num_classes = 3, .width = 8, .seed = 2});
  const Tensor x = batch_of({random_image(16, 16, 4)});
  const auto loss = linear_loss(1);
  std::vector<double> grad;
  const double v = m.parameter_gradient(x, loss, grad);
  EXPECT_NEAR(v, loss(m.forward(x)).value, 1e-9);
  ASSERT_EQ(grad.size(), m.parameter_count());
  const std::vector<double> p0 = m.parameters();
  const double h = 1e-5;
  for (std::size_t i = 0; i < p0.size(); i += p0.size() / 23 + 1) {
    std::vector<double> p = p0;
    p[i] = p0[i] + h;
    m.set_parameters(p);
    const double up = loss(m.forward(x)).value;
    p[i] = p0[i] - h;
    m.set_parameters(p);
    const double dn = loss(m.forward(x)).value;
    const double fd = (up - dn) / (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "param " << i;
  }
  m.set_parameters(p0);
}

TEST_P(ToyKinds, InputGradientRequiresInferenceMode) {
  ToyModel m({.kind = GetParam(), .num_classes = 3});
  EXPECT_FALSE(m.inference_mode());
  EXPECT_THROW(m.input_gradient(batch_of({random_image(8, 8, 0)}), linear_loss(0)), StateError);
}

TEST_P(ToyKinds, SaveLoadRoundTrip) {
  TempDir tmp;
  ToyModel m({.kind = GetParam(), .num_classes = 5, .seed = 7});
  m.save_weights(tmp / "w.bin");
  const ToyModel back = ToyModel::load_weights(tmp / "w.bin");
  EXPECT_EQ(back.name(), m.name());
  EXPECT_EQ(back.parameter_checksum(), m.parameter_checksum());
  EXPECT_TRUE(back.inference_mode());
  const Tensor x = batch_of({random_image(16, 24, 1)});
  EXPECT_EQ(back.forward(x), m.forward(x));
}

TEST_P(ToyKinds, SeedsChangeWeights) {
  const ToyModel a({.kind = GetParam(), .seed = 1}), b({.kind = GetParam(), .seed = 1}), c({.kind = GetParam(), .seed = 2});
  EXPECT_EQ(a.parameter_checksum(), b.parameter_checksum());
  EXPECT_NE(a.parameter_checksum(), c.parameter_checksum());
}

INSTANTIATE_TEST_SUITE_P(Both, ToyKinds, ::testing::Values(ToyKind::kTinyCnn, ToyKind::kTinyAttention),
                         [](const auto& info) { return to_string(info.param); });

// Largest Chebyshev distance at which perturbing the centre pixel moves a logit.
std::size_t probe_influence(const ToyModel& m, std::size_t side) {
  const Tensor x = batch_of({random_image(side, side, 11)});
  Tensor y = x;
  const std::size_t c = side / 2;
  for (std::size_t ch = 0; ch < 3; ++ch) y(0, ch, c, c) = 1.0 - y(0, ch, c, c);
  const Tensor a = m.forward(x), b = m.forward(y);
  std::size_t reach = 0;
  const PixelRect px{c, c, c + 1, c + 1};
  for (std::size_t k = 0; k < a.dim(1); ++k)
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t q = 0; q < side; ++q)
        if (std::abs(a(0, k, r, q) - b(0, k, r, q)) > 1e-12) reach = std::max(reach, chebyshev_distance(px, r, q));
  return reach;
}

TEST(ReceptiveField, CnnInfluenceStaysWithinDeclaredRadius) {
  const ToyModel m({.kind = ToyKind::kTinyCnn, .seed = 3});
  const std::size_t radius = m.receptive_radius();
  EXPECT_EQ(radius, 36u);
  const std::size_t reach = probe_influence(m, 112);
  EXPECT_LE(reach, radius);
  EXPECT_GE(reach, radius / 2);
}

TEST(ReceptiveField, AttentionIsGlobal) {
  const ToyModel m({.kind = ToyKind::kTinyAttention, .seed = 3});
  EXPECT_EQ(m.receptive_radius(), std::numeric_limits<std::size_t>::max());
  EXPECT_GE(probe_influence(m, 112), 50u);
}

TEST(Weights, RejectsCorruptFiles) {
  TempDir tmp;
  {
    std::ofstream(tmp / "junk.bin") << "not weights";
  }
  EXPECT_THROW(ToyModel::load_weights(tmp / "junk.bin"), FormatError);
  ToyModel m({.kind = ToyKind::kTinyCnn});
  m.save_weights(tmp / "w.bin");
  std::filesystem::resize_file(tmp / "w.bin", std::filesystem::file_size(tmp / "w.bin") - 8);
  EXPECT_THROW(ToyModel::load_weights(tmp / "w.bin"), FormatError);
  EXPECT_THROW(ToyModel::load_weights(tmp / "absent.bin"), IoError);
}

TEST(ToyConfig, Validation) {
  EXPECT_THROW(ToyModel({.kind = ToyKind::kTinyCnn, .num_classes = 1}), ConfigError);
  EXPECT_THROW(ToyModel({.kind = ToyKind::kTinyAttention, .width = 6}), ConfigError);
  EXPECT_THROW(parse_toy_kind("resnet"), UnknownModel);
  EXPECT_EQ(parse_toy_kind("tiny_attention"), ToyKind::kTinyAttention);
}

TEST(Registry, BuiltinsAndErrors) {
  AdapterRegistry reg = AdapterRegistry::with_builtins();
  EXPECT_EQ(reg.names(), (std::vector<std::string>{"tiny_attention", "tiny_cnn"}));
  auto a = reg.get_adapter("tiny_cnn", {.num_classes = 4});
  EXPECT_EQ(a->num_classes(), 4);
  EXPECT_TRUE(a->inference_mode());
  EXPECT_THROW(reg.get_adapter("nope"), UnknownModel);
  EXPECT_THROW(reg.register_adapter("tiny_cnn", nullptr), DuplicateName);
  EXPECT_THROW(reg.register_adapter("", nullptr), ConfigError);

  reg.register_adapter("fake", [](const AdapterOptions&) {
    return std::make_unique<testing::NearestColorAdapter>("fake", std::vector<std::array<double, 3>>{{0, 0, 0}, {1, 1, 1}});
  });
  EXPECT_TRUE(reg.contains("fake"));
  EXPECT_EQ(reg.get_adapter("fake")->parameter_checksum(), 42u);
  EXPECT_FALSE(AdapterRegistry{}.contains("tiny_cnn"));
}

TEST(Registry, WeightsKindMustMatch) {
  TempDir tmp;
  ToyModel({.kind = ToyKind::kTinyCnn}).save_weights(tmp / "cnn.bin");
  const auto& reg = AdapterRegistry::global();
  EXPECT_NO_THROW(reg.get_adapter("tiny_cnn", {.weights = tmp / "cnn.bin"}));
  EXPECT_THROW(reg.get_adapter("tiny_attention", {.weights = tmp / "cnn.bin"}), FormatError);
}

TEST(Pretrain, ZeroEpochsLeavesWeightsAndEvaluates) {
  const SynthShapesDataset train = synth_shapes(4, 32, 32, 6, 1), val = synth_shapes(2, 32, 32, 6, 2);
  ToyModel m({.kind = ToyKind::kTinyCnn});
  const auto before = m.parameter_checksum();
  const PretrainReport r = pretrain_toy(m, train, val, {.epochs = 0, .transform = {.crop_size = 32}});
  EXPECT_TRUE(r.epoch_losses.empty());
  EXPECT_EQ(m.parameter_checksum(), before);
  EXPECT_EQ(r.checksum, before);
  EXPECT_TRUE(m.inference_mode());
  EXPECT_GE(r.val_miou, 0.0);
}

TEST(Pretrain, LossDecreasesAndIsDeterministic) {
  const SynthShapesDataset train = synth_shapes(8, 32, 32, 6, 1), val = synth_shapes(2, 32, 32, 6, 2);
  PretrainConfig cfg{.epochs = 4, .batch_size = 4, .transform = {.crop_size = 32}};
  std::vector<int> epochs_seen;
  cfg.on_epoch = [&](int e, double) { epochs_seen.push_back(e); };
  ToyModel a({.kind = ToyKind::kTinyCnn}), b({.kind = ToyKind::kTinyCnn});
  const PretrainReport ra = pretrain_toy(a, train, val, cfg);
  const PretrainReport rb = pretrain_toy(b, train, val, cfg);
  ASSERT_EQ(ra.epoch_losses.size(), 4u);
  EXPECT_LT(ra.epoch_losses.back(), ra.epoch_losses.front());
  EXPECT_EQ(ra.epoch_losses, rb.epoch_losses);
  EXPECT_EQ(a.parameter_checksum(), b.parameter_checksum());
  EXPECT_EQ(epochs_seen, (std::vector<int>{1, 2, 3, 4, 1, 2, 3, 4}));
}

TEST(Pretrain, RejectsBadConfig) {
  const SynthShapesDataset train = synth_shapes(2, 16, 16, 6, 1);
  ToyModel m({.kind = ToyKind::kTinyCnn});
  EXPECT_THROW(pretrain_toy(m, train, train, {.epochs = -1}), ConfigError);
  EXPECT_THROW(pretrain_toy(m, train, train, {.learning_rate = 0.0}), ConfigError);
  ToyModel three({.kind = ToyKind::kTinyCnn, .num_classes = 3});
  EXPECT_THROW(pretrain_toy(three, train, train, {.epochs = 1}), ConfigError);
}

TEST(Helpers, PredictLabelsIsArgmaxOfForward) {
  ToyModel m({.kind = ToyKind::kTinyCnn, .num_classes = 4});
  const Tensor img = random_image(16, 16, 2);
  EXPECT_EQ(predict_labels(m, img), argmax_labels(forward_single(m, img)));
}

}  // namespace
}  // namespace patchforge
