#include <gtest/gtest.h>

#include "patchforge/datasets.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/evalsuite.hpp"
#include "patchforge/metrics.hpp"
#include "test_support.hpp"

namespace patchforge {
namespace {

using testing::NearestColorAdapter;

std::vector<std::array<double, 3>> palette() {
  std::vector<std::array<double, 3>> centres{{0.45, 0.45, 0.45}};
  for (int k = 1; k < 6; ++k) centres.push_back(SynthShapesDataset::color_for_class(k));
  return centres;
}

SynthShapesDataset plain_data(std::size_t n = 4) {
  SynthShapesParams p;
  p.n_images = n;
  p.height = 32;
  p.width = 48;
  p.seed = 5;
  p.illumination_jitter = 0.0;
  return SynthShapesDataset(p);
}

// Per-pixel colour logits plus a class-1 bonus proportional to the fraction
// of saturated red pixels anywhere in the image, so pasting a red patch can
// flip pixels far away. Clean renders never saturate.
class GlobalShiftAdapter final : public ModelAdapter {
 public:
  explicit GlobalShiftAdapter(double gain) : inner_("shift", palette()), gain_(gain) {}
  std::string name() const override { return "shift"; }
  int num_classes() const override { return inner_.num_classes(); }
  std::int32_t ignore_index() const override { return 255; }
  Tensor forward(const Tensor& images) const override {
    Tensor out = inner_.forward(images);
    const std::size_t h = images.dim(2), w = images.dim(3);
    for (std::size_t b = 0; b < images.dim(0); ++b) {
      double hits = 0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          hits += images(b, 0, y, x) > 0.99 && images(b, 1, y, x) < 0.01 && images(b, 2, y, x) < 0.01;
      const double bonus = gain_ * hits / static_cast<double>(h * w);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out(b, 1, y, x) += bonus;
    }
    return out;
  }
  Tensor input_gradient(const Tensor&, const ScalarLossFn&) const override { throw StateError("not used"); }
  void set_inference_mode() override {}
  bool inference_mode() const override { return true; }
  std::uint64_t parameter_checksum() const override { return 1; }

 private:
  NearestColorAdapter inner_;
  double gain_;
};

TEST(EvaluatePatch, PerPixelModelIsUnaffectedOffPatch) {
  const NearestColorAdapter adapter("nearest", palette());
  const SynthShapesDataset ds = plain_data();
  const Patch p = random_patch(8, 8, 1);
  const EvalReport r = evaluate_patch(adapter, p, ds, {.spread_subset = 0}, "p", 0.9);
  ASSERT_TRUE(r.clean_miou);
  EXPECT_DOUBLE_EQ(r.miou, *r.clean_miou);
  EXPECT_EQ(r.spread.total_flips, 0u);
  EXPECT_EQ(r.n_images, 4u);
  EXPECT_EQ(r.pixels_counted, 4u * (32 * 48 - 64));
  EXPECT_NEAR(*r.drop_vs_baseline, 0.9 - r.miou, 1e-15);
  EXPECT_EQ(r.spread.far_radius, 16u);
  EXPECT_GT(r.miou, 0.9);
}

TEST(EvaluatePatch, MatchesManualConfusion) {
  const NearestColorAdapter adapter("nearest", palette());
  const SynthShapesDataset ds = plain_data(3);
  const Patch p = random_patch(5, 7, 2);
  ConfusionMatrix cm(6);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const SampleRecord rec = ds.get(i);
    const AppliedPatch ap = apply_patch(rec.image, p);
    update_confusion(cm, predict_labels(adapter, ap.image), rec.label, ap.region, 255);
  }
  EXPECT_DOUBLE_EQ(evaluate_patch(adapter, p, ds).miou, miou(cm));
  const std::vector<std::size_t> idx{0, 1, 2};
  EXPECT_EQ(attacked_confusion(adapter, p, ds, idx), cm);
}

TEST(EvaluatePatch, GlobalModelFlipsFarPixels) {
  const GlobalShiftAdapter adapter(1000.0);
  const SynthShapesDataset ds = plain_data();
  const Patch red(10, 10, [] {
    std::vector<float> v(300, 0.0f);
    std::fill(v.begin(), v.begin() + 100, 1.0f);
    return v;
  }());
  const EvalReport r = evaluate_patch(adapter, red, ds, {.spread_subset = 0, .far_radius_factor = 1.0});
  EXPECT_GT(r.spread.total_flips, 0u);
  EXPECT_GT(r.spread.far_flip_ratio, 0.3);
  EXPECT_LT(r.miou, *r.clean_miou);
}

TEST(EvaluatePatch, RejectsBadOptions) {
  const NearestColorAdapter adapter("nearest", palette());
  const SynthShapesDataset ds = plain_data(1);
  EXPECT_THROW(evaluate_patch(adapter, random_patch(2, 2, 0), ds, {.spread_bin_width = 0}), ConfigError);
  EXPECT_THROW(evaluate_patch(adapter, random_patch(40, 40, 0), ds), PatchTooLarge);
}

TEST(TransferMatrix, ShapeBaselineAndCsv) {
  const NearestColorAdapter a("m_a", palette());
  const GlobalShiftAdapter b(1000.0);
  const SynthShapesDataset ds = plain_data(3);
  const std::vector<NamedPatch> patches{{"m_a", random_patch(6, 6, 1)}, {"shift", random_patch(6, 6, 2)}};
  const std::vector<NamedAdapter> adapters{{"m_a", &a}, {"shift", &b}};
  const TransferMatrix m = transfer_matrix(patches, adapters, ds, {}, 7);
  ASSERT_EQ(m.values.size(), 3u);
  ASSERT_EQ(m.values[0].size(), 2u);
  EXPECT_EQ(m.row_labels, (std::vector<std::string>{"random", "m_a", "shift"}));
  EXPECT_EQ(m.col_labels, (std::vector<std::string>{"m_a", "shift"}));

  const Patch baseline = random_patch(6, 6, mix_seed(7, 0x72616e64));
  EXPECT_DOUBLE_EQ(m.values[0][1], evaluate_patch(b, baseline, ds).miou);
  EXPECT_DOUBLE_EQ(m.values[2][1], evaluate_patch(b, patches[1].patch, ds).miou);
  EXPECT_DOUBLE_EQ(m.drop(2, 1), m.values[0][1] - m.values[2][1]);
  EXPECT_DOUBLE_EQ(*m.reports[2][1].drop_vs_baseline, m.drop(2, 1));
  // Per-pixel column: every row is identical.
  EXPECT_DOUBLE_EQ(m.values[1][0], m.values[0][0]);

  const std::string csv = transfer_matrix_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "patch,m_a,shift");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  char buf[64];
  std::snprintf(buf, sizeof buf, "random,%.4f,%.4f\n", m.values[0][0], m.values[0][1]);
  EXPECT_NE(csv.find(buf), std::string::npos);
}

TEST(TransferMatrix, RejectsDuplicates) {
  const NearestColorAdapter a("m_a", palette());
  const SynthShapesDataset ds = plain_data(1);
  const std::vector<NamedAdapter> adapters{{"m_a", &a}};
  const std::vector<NamedPatch> dup{{"x", random_patch(2, 2, 0)}, {"x", random_patch(2, 2, 1)}};
  EXPECT_THROW(transfer_matrix(dup, adapters, ds), DuplicateName);
  const std::vector<NamedPatch> reserved{{"random", random_patch(2, 2, 0)}};
  EXPECT_THROW(transfer_matrix(reserved, adapters, ds), DuplicateName);
  const std::vector<NamedPatch> one{{"x", random_patch(2, 2, 0)}};
  const std::vector<NamedAdapter> twice{{"m_a", &a}, {"m_a", &a}};
  EXPECT_THROW(transfer_matrix(one, twice, ds), DuplicateName);
}

TransferMatrix crafted(std::vector<std::vector<double>> values) {
  TransferMatrix m;
  m.row_labels = {"random", "a", "b"};
  m.col_labels = {"a", "b"};
  m.values = std::move(values);
  return m;
}

TEST(DiagonalViolations, RowAndColumnChecks) {
  EXPECT_TRUE(diagonal_violations(crafted({{0.8, 0.8}, {0.6, 0.79}, {0.78, 0.7}})).empty());
  // Patch a hurts model b more than model a.
  EXPECT_EQ(diagonal_violations(crafted({{0.8, 0.8}, {0.75, 0.6}, {0.8, 0.5}})).size(), 1u);
  // Patch b hurts model a more than patch a does, and more than it hurts b.
  const auto v = diagonal_violations(crafted({{0.8, 0.8}, {0.7, 0.8}, {0.6, 0.75}}));
  EXPECT_EQ(v.size(), 2u);
  // Ties are fine.
  EXPECT_TRUE(diagonal_violations(crafted({{0.8, 0.8}, {0.7, 0.7}, {0.7, 0.7}})).empty());
}

TEST(Decay, LoggerEvaluatesEachPatch) {
  const NearestColorAdapter adapter("nearest", palette());
  const SynthShapesDataset ds = plain_data(3);
  const std::vector<Patch> stream{random_patch(4, 4, 0), random_patch(4, 4, 1)};
  const std::vector<std::size_t> subset{0, 2};
  const auto points = decay_logger(adapter, stream, ds, subset);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[1].epoch, 1);
  EXPECT_DOUBLE_EQ(points[0].miou, evaluate_subset(adapter, stream[0], ds, subset).miou);
  EXPECT_THROW(evaluate_subset(adapter, stream[0], ds, std::vector<std::size_t>{}), EmptyDataset);
}

}  // namespace
}  // namespace patchforge
