#include <gtest/gtest.h>

#include <set>

#include "patchforge/errors.hpp"
#include "patchforge/rng.hpp"
#include "patchforge/tensor.hpp"

namespace patchforge {
namespace {

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  t(1, 2, 3) = 5.0;
  EXPECT_EQ(t[23], 5.0);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), ShapeMismatch);
}

TEST(Tensor, SliceAndStackRoundTrip) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {5, 6, 7, 8});
  const std::vector<Tensor> items{a, b};
  const Tensor s = Tensor::stack(items);
  EXPECT_EQ(s.shape(), (std::vector<std::size_t>{2, 2, 2}));
  EXPECT_EQ(s.slice(0), a);
  EXPECT_EQ(s.slice(1), b);
  EXPECT_THROW(s.slice(2), ShapeMismatch);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, RangesHold) {
  Rng rng(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const float f = rng.uniform_float();
    EXPECT_GE(f, 0.0f);
    EXPECT_LT(f, 1.0f);
    const auto k = rng.below(5);
    EXPECT_LT(k, 5u);
    seen.insert(k);
    const auto j = rng.between(-2, 2);
    EXPECT_GE(j, -2);
    EXPECT_LE(j, 2);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Rng, NormalMoments) {
  Rng rng(3);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Rng, MixSeedSeparatesKeys) {
  EXPECT_NE(mix_seed(0, 1), mix_seed(0, 2));
  EXPECT_NE(mix_seed(1, 1), mix_seed(0, 1));
  EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}

}  // namespace
}  // namespace patchforge
