#include <gtest/gtest.h>

#include <set>

#include "patchforge/errors.hpp"
#include "patchforge/transforms.hpp"
#include "test_support.hpp"

namespace patchforge {
namespace {

using testing::random_image;
using testing::random_labels;

TEST(Transforms, ScaledExtentRoundsAndClamps) {
  EXPECT_EQ(scaled_extent(1024, 0.5), 512u);
  EXPECT_EQ(scaled_extent(2048, 2.0), 4096u);
  EXPECT_EQ(scaled_extent(3, 0.5), 2u);  // 1.5 rounds away from zero
  EXPECT_EQ(scaled_extent(1, 0.2), 1u);
}

TEST(Transforms, OutputIsCropSquare) {
  TransformConfig cfg{.crop_size = 32};
  const Tensor img = random_image(20, 40, 1);
  const LabelMap lab = random_labels(20, 40, 4, 2);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const TransformSpec t = sample_transform(rng, cfg, 20, 40);
    EXPECT_GE(t.scale, 0.5);
    EXPECT_LE(t.scale, 2.0);
    const TransformedSample s = apply_transform(img, lab, t, cfg);
    EXPECT_EQ(s.image.shape(), (std::vector<std::size_t>{3, 32, 32}));
    EXPECT_EQ(s.label.height, 32u);
    EXPECT_EQ(s.label.width, 32u);
  }
}

TEST(Transforms, PaddingUsesConfiguredValues) {
  TransformConfig cfg{.scale_min = 1.0, .scale_max = 1.0, .crop_size = 8};
  const Tensor img = random_image(4, 6, 1);
  const LabelMap lab = random_labels(4, 6, 3, 1);
  const TransformedSample s = apply_transform(img, lab, {1.0, false, 0, 0}, cfg);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      if (y < 4 && x < 6) {
        EXPECT_EQ(s.image(1, y, x), img(1, y, x));
        EXPECT_EQ(s.label.at(y, x), lab.at(y, x));
      } else {
        EXPECT_EQ(s.image(0, y, x), 0.485);
        EXPECT_EQ(s.image(2, y, x), 0.406);
        EXPECT_EQ(s.label.at(y, x), 255);
      }
    }
}

TEST(Transforms, IdentitySpecIsExact) {
  TransformConfig cfg{.scale_min = 1.0, .scale_max = 1.0, .crop_size = 16};
  const Tensor img = random_image(16, 16, 4);
  const LabelMap lab = random_labels(16, 16, 5, 4);
  const TransformedSample s = apply_transform(img, lab, {}, cfg);
  EXPECT_EQ(s.image, img);
  EXPECT_EQ(s.label, lab);
}

TEST(Transforms, FlipIsInvolution) {
  const Tensor img = random_image(5, 7, 2);
  const LabelMap lab = random_labels(5, 7, 3, 2);
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  EXPECT_EQ(flip_horizontal(flip_horizontal(lab)), lab);
  EXPECT_EQ(flip_horizontal(img)(1, 2, 0), img(1, 2, 6));
}

TEST(Transforms, NearestNeverInventsClasses) {
  const LabelMap lab = random_labels(9, 13, 4, 7);
  std::set<std::int32_t> before(lab.values.begin(), lab.values.end());
  for (auto [h, w] : {std::pair{4, 6}, {18, 26}, {11, 3}}) {
    const LabelMap r = resize_nearest(lab, h, w);
    for (auto v : r.values) EXPECT_TRUE(before.contains(v));
  }
}

TEST(Transforms, BilinearPreservesConstants) {
  Tensor img({3, 5, 5}, 0.25);
  const Tensor r = resize_bilinear(img, 9, 3);
  for (double v : r.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Transforms, RejectsInvalidSpecs) {
  TransformConfig cfg{.crop_size = 8};
  const Tensor img = random_image(8, 8, 1);
  const LabelMap lab = random_labels(8, 8, 2, 1);
  EXPECT_THROW(apply_transform(img, lab, {3.0, false, 0, 0}, cfg), InvalidSpec);
  EXPECT_THROW(apply_transform(img, lab, {1.0, false, 5, 0}, cfg), InvalidSpec);
  TransformConfig bad{.scale_min = 2.0, .scale_max = 1.0};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Transforms, SamplingIsSeeded) {
  TransformConfig cfg{.crop_size = 64};
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_transform(a, cfg, 128, 256), sample_transform(b, cfg, 128, 256));
}

}  // namespace
}  // namespace patchforge
