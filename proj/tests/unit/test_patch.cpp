#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "patchforge/errors.hpp"
#include "patchforge/patch.hpp"
#include "test_support.hpp"

namespace patchforge {
namespace {

using testing::random_image;
using testing::TempDir;

TEST(Placement, CenterUsesFloorOfSlack) {
  const PlacementSpec p;
  EXPECT_EQ(p.resolved_region(1024, 2048, 200, 200), (PixelRect{412, 924, 612, 1124}));
  EXPECT_EQ(p.resolved_region(128, 256, 25, 25), (PixelRect{51, 115, 76, 140}));
  EXPECT_EQ(p.resolved_region(5, 5, 5, 5), (PixelRect{0, 0, 5, 5}));
  EXPECT_THROW(p.resolved_region(10, 10, 11, 4), PatchTooLarge);
}

TEST(Patch, RejectsOutOfRangeValues) {
  EXPECT_THROW(Patch(1, 1, {0.f, 0.f, 1.5f}), DomainError);
  EXPECT_THROW(Patch(1, 1, {0.f, 0.f}), ShapeMismatch);
  EXPECT_NO_THROW(Patch(1, 1, {0.f, 1.f, 0.5f}));
}

TEST(Patch, ApplyReplacesRegionOnly) {
  const Tensor img = random_image(12, 20, 1);
  const Patch p = random_patch(4, 6, 2);
  const AppliedPatch ap = apply_patch(img, p);
  EXPECT_EQ(ap.region, (PixelRect{4, 7, 8, 13}));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 12; ++y)
      for (std::size_t x = 0; x < 20; ++x) {
        if (ap.region.contains(y, x)) {
          EXPECT_EQ(ap.image(c, y, x), static_cast<double>(p.at(c, y - 4, x - 7)));
        } else {
          EXPECT_EQ(ap.image(c, y, x), img(c, y, x));
        }
      }
}

TEST(Patch, ApplyValidatesImage) {
  Tensor img = random_image(4, 4, 0);
  img(0, 0, 0) = -0.1;
  EXPECT_THROW(apply_patch(img, random_patch(2, 2, 0)), DomainError);
  EXPECT_THROW(apply_patch(Tensor({1, 4, 4}), random_patch(2, 2, 0)), ShapeMismatch);
}

TEST(Patch, ClipClampsAndRejectsNan) {
  PatchDraft d{1, 1, {-0.2f, 0.4f, 1.7f}};
  const Patch p = clip_patch(d);
  EXPECT_EQ(p.values()[0], 0.0f);
  EXPECT_EQ(p.values()[1], 0.4f);
  EXPECT_EQ(p.values()[2], 1.0f);
  d.values[1] = std::nanf("");
  EXPECT_THROW(clip_patch(d), DomainError);
  EXPECT_EQ(clip_patch(p), p);
}

TEST(Patch, RandomPatchSeededAndInRange) {
  const Patch a = random_patch(8, 8, 3), b = random_patch(8, 8, 3), c = random_patch(8, 8, 4);
  EXPECT_EQ(a.values().size(), 192u);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  for (float v : a.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(PatchArtifact, RoundTripIsExact) {
  TempDir tmp;
  Patch p = random_patch(5, 7, 11);
  p.set_meta({.source_model = "tiny_cnn", .train_epochs = 3, .step_size = 0.005, .seed = 9, .created_utc = "x"});
  save_patch(p, tmp / "a.apf");
  EXPECT_TRUE(std::filesystem::exists(tmp / "a.apf" / "preview.png"));
  EXPECT_EQ(std::filesystem::file_size(tmp / "a.apf" / "values.bin"), 3u * 5 * 7 * 4);
  const Patch q = load_patch(tmp / "a.apf");
  EXPECT_EQ(q, p);
}

TEST(PatchArtifact, ValuesAreLittleEndianFloat32) {
  TempDir tmp;
  const Patch p(1, 1, {0.0f, 0.5f, 1.0f});
  save_patch(p, tmp / "p.apf");
  std::ifstream is(tmp / "p.apf" / "values.bin", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), {});
  ASSERT_EQ(bytes.size(), 12u);
  // 0.5f = 0x3f000000, 1.0f = 0x3f800000
  EXPECT_EQ(bytes[4], 0x00);
  EXPECT_EQ(bytes[7], 0x3f);
  EXPECT_EQ(bytes[10], 0x80);
  EXPECT_EQ(bytes[11], 0x3f);
}

TEST(PatchArtifact, RejectsBadArtifacts) {
  TempDir tmp;
  save_patch(random_patch(2, 2, 0), tmp / "p.apf");
  auto meta = nlohmann::json::parse(std::ifstream(tmp / "p.apf" / "meta.json"));
  meta["format_version"] = 2;
  std::ofstream(tmp / "p.apf" / "meta.json") << meta.dump();
  EXPECT_THROW(load_patch(tmp / "p.apf"), FormatError);

  save_patch(random_patch(2, 2, 0), tmp / "q.apf");
  std::filesystem::resize_file(tmp / "q.apf" / "values.bin", 10);
  EXPECT_THROW(load_patch(tmp / "q.apf"), FormatError);

  save_patch(random_patch(2, 2, 0), tmp / "r.apf");
  {
    std::fstream f(tmp / "r.apf" / "values.bin", std::ios::binary | std::ios::in | std::ios::out);
    const float bad = 2.0f;
    f.write(reinterpret_cast<const char*>(&bad), 4);
  }
  EXPECT_THROW(load_patch(tmp / "r.apf"), FormatError);
  EXPECT_THROW(load_patch(tmp / "missing.apf"), FormatError);
}

TEST(Patch, ExtractInvertsPaste) {
  const Tensor img = random_image(9, 9, 5);
  const Patch p = random_patch(3, 3, 6);
  const AppliedPatch ap = apply_patch(img, p);
  const Patch back = extract_patch(ap.image, ap.region);
  EXPECT_TRUE(std::equal(back.values().begin(), back.values().end(), p.values().begin()));
}

}  // namespace
}  // namespace patchforge
