#include <gtest/gtest.h>

#include <cmath>

#include "patchforge/adv_loss.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/rng.hpp"
#include "test_support.hpp"

namespace patchforge {
namespace {

Tensor random_logits(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  Tensor t({c, h, w});
  Rng rng(seed);
  for (double& v : t.values()) v = 3.0 * rng.normal();
  return t;
}

// Independent reference: plain loops, logsumexp with max shift.
double oracle_ce(const Tensor& logits, const LabelMap& label, const std::optional<PixelRect>& region, int ignore) {
  const std::size_t C = logits.dim(0), H = logits.dim(1), W = logits.dim(2);
  double sum = 0;
  int n = 0;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const int g = label.at(y, x);
      if (g == ignore || (region && region->contains(y, x))) continue;
      std::size_t best = 0;
      double mx = logits(0, y, x);
      for (std::size_t k = 1; k < C; ++k)
        if (logits(k, y, x) > mx) {
          mx = logits(k, y, x);
          best = k;
        }
      if (static_cast<int>(best) != g) continue;
      double z = 0;
      for (std::size_t k = 0; k < C; ++k) z += std::exp(logits(k, y, x) - mx);
      sum += -(logits(g, y, x) - mx - std::log(z));
      ++n;
    }
  return n ? sum / n : 0.0;
}

// Labels that agree with the argmax on roughly half of the pixels.
LabelMap half_correct_labels(const Tensor& logits, std::uint64_t seed) {
  const std::size_t C = logits.dim(0), H = logits.dim(1), W = logits.dim(2);
  LabelMap l(H, W);
  Rng rng(seed);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < C; ++k)
        if (logits(k, y, x) > logits(best, y, x)) best = k;
      const double u = rng.uniform();
      l.at(y, x) = u < 0.5 ? static_cast<int>(best) : u < 0.9 ? static_cast<int>(rng.below(C)) : 255;
    }
  return l;
}

TEST(CorrectnessMask, PartitionsPixels) {
  const Tensor logits = random_logits(4, 10, 12, 1);
  const LabelMap label = half_correct_labels(logits, 2);
  const PixelRect region{2, 3, 6, 9};
  const CorrectnessMask m = correctness_mask(logits, label, region, 255);
  std::size_t n = 0;
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 12; ++x) {
      const std::size_t i = y * 12 + x;
      const bool excl = region.contains(y, x) || label.at(y, x) == 255;
      EXPECT_EQ(m.excluded[i] != 0, excl);
      EXPECT_FALSE(m.mask[i] && m.excluded[i]);
      n += m.mask[i];
    }
  EXPECT_EQ(n, m.count);
  EXPECT_GT(m.count, 0u);
}

TEST(CorrectnessMask, TiesGoToLowestClass) {
  Tensor logits({3, 1, 1}, 1.0);
  LabelMap label(1, 1, 0);
  EXPECT_EQ(correctness_mask(logits, label, std::nullopt, 255).count, 1u);
  label.at(0, 0) = 1;
  EXPECT_EQ(correctness_mask(logits, label, std::nullopt, 255).count, 0u);
}

TEST(MaskedCrossEntropy, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor logits = random_logits(5, 9, 11, seed);
    const LabelMap label = half_correct_labels(logits, seed + 100);
    const std::optional<PixelRect> region = seed % 2 ? std::optional(PixelRect{1, 1, 5, 5}) : std::nullopt;
    const CorrectnessMask m = correctness_mask(logits, label, region, 255);
    EXPECT_NEAR(masked_cross_entropy(logits, label, m), oracle_ce(logits, label, region, 255), 1e-12);
    EXPECT_NEAR(masked_cross_entropy_grad(logits, label, m).value, oracle_ce(logits, label, region, 255), 1e-12);
  }
}

TEST(MaskedCrossEntropy, ZeroWhenNothingCorrect) {
  const Tensor logits = random_logits(3, 4, 4, 7);
  LabelMap label(4, 4, 255);
  const CorrectnessMask m = correctness_mask(logits, label, std::nullopt, 255);
  EXPECT_EQ(m.count, 0u);
  const LossAndGradient lg = masked_cross_entropy_grad(logits, label, m);
  EXPECT_EQ(lg.value, 0.0);
  for (double g : lg.grad_logits.values()) EXPECT_EQ(g, 0.0);
}

TEST(MaskedCrossEntropy, GradientMatchesFiniteDifferenceWithFixedMask) {
  const Tensor logits = random_logits(4, 6, 7, 3);
  const LabelMap label = half_correct_labels(logits, 4);
  const CorrectnessMask m = correctness_mask(logits, label, PixelRect{0, 0, 2, 2}, 255);
  const LossAndGradient lg = masked_cross_entropy_grad(logits, label, m);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); i += 3) {
    Tensor a = logits, b = logits;
    a[i] += h;
    b[i] -= h;
    const double fd = (masked_cross_entropy(a, label, m) - masked_cross_entropy(b, label, m)) / (2 * h);
    EXPECT_NEAR(lg.grad_logits[i], fd, 1e-7) << "index " << i;
  }
}

TEST(BatchLoss, IsMeanOfPerImageLosses) {
  const std::vector<double> v{1.0, 2.0, 6.0};
  EXPECT_DOUBLE_EQ(batch_loss(v), 3.0);
  EXPECT_THROW(batch_loss(std::vector<double>{}), EmptyBatch);
}

TEST(AdversarialBatchLoss, CombinesImagesAndScalesGradient) {
  const Tensor a = random_logits(3, 5, 5, 10), b = random_logits(3, 5, 5, 11);
  const std::vector<Tensor> items{a, b};
  const Tensor batch = Tensor::stack(items);
  const std::vector<LabelMap> labels{half_correct_labels(a, 1), half_correct_labels(b, 2)};
  const std::vector<std::optional<PixelRect>> regions{PixelRect{1, 1, 3, 3}, std::nullopt};
  const BatchLoss bl = adversarial_batch_loss(batch, labels, regions, 255);
  ASSERT_EQ(bl.per_image.size(), 2u);
  EXPECT_NEAR(bl.per_image[0], oracle_ce(a, labels[0], regions[0], 255), 1e-12);
  EXPECT_NEAR(bl.per_image[1], oracle_ce(b, labels[1], regions[1], 255), 1e-12);
  EXPECT_NEAR(bl.value, 0.5 * (bl.per_image[0] + bl.per_image[1]), 1e-15);

  const CorrectnessMask m0 = correctness_mask(a, labels[0], regions[0], 255);
  const LossAndGradient g0 = masked_cross_entropy_grad(a, labels[0], m0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(bl.grad_logits[i], 0.5 * g0.grad_logits[i], 1e-15);
}

TEST(AdversarialBatchLoss, RejectsBadShapes) {
  const Tensor batch({1, 3, 4, 4});
  const std::vector<LabelMap> labels{LabelMap(4, 4)};
  const std::vector<std::optional<PixelRect>> none;
  EXPECT_THROW(adversarial_batch_loss(batch, labels, none, 255), ShapeMismatch);
  EXPECT_THROW(adversarial_batch_loss(Tensor({3, 4, 4}), labels, none, 255), ShapeMismatch);
}

}  // namespace
}  // namespace patchforge
