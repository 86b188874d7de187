#include <gtest/gtest.h>

#include <json.hpp>

#include "patchforge/errors.hpp"
#include "patchforge/report_io.hpp"
#include "test_support.hpp"

namespace patchforge {
namespace {

TEST(HistoryJson, RoundTripKeepsNulls) {
  TrainHistory h;
  h.model = "tiny_cnn";
  h.class_names = {"background", "red_rectangle"};
  h.records.push_back({.epoch = 0, .eval_miou = 0.9, .per_class_iou = {0.95, std::nullopt}, .wall_time_s = 0.1});
  h.records.push_back({.epoch = 1, .mean_loss = 0.25, .eval_miou = std::nullopt, .wall_time_s = 1.5});
  const std::string text = history_to_json(h);
  const auto j = nlohmann::json::parse(text);
  EXPECT_TRUE(j["records"][0]["mean_loss"].is_null());
  EXPECT_TRUE(j["records"][0]["per_class_iou"][1].is_null());
  EXPECT_EQ(j["model"], "tiny_cnn");

  const TrainHistory back = history_from_json(text);
  EXPECT_EQ(back.model, h.model);
  EXPECT_EQ(back.class_names, h.class_names);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_FALSE(back.records[0].mean_loss);
  EXPECT_EQ(back.records[0].eval_miou, 0.9);
  EXPECT_EQ(back.records[0].per_class_iou, h.records[0].per_class_iou);
  EXPECT_EQ(back.records[1].mean_loss, 0.25);
  EXPECT_FALSE(back.records[1].eval_miou);
}

EvalReport sample_report() {
  EvalReport r;
  r.model = "tiny_attention";
  r.patch_tag = "tiny_cnn";
  r.miou = 0.71;
  r.per_class_iou = {0.9, std::nullopt, 0.52};
  r.baseline_miou = 0.8;
  r.drop_vs_baseline = 0.09;
  r.clean_miou = 0.82;
  r.n_images = 40;
  r.pixels_counted = 123456;
  r.spread.bin_edges = {0, 8, 16};
  r.spread.flip_rate = {0.25, 0.0};
  r.spread.bin_pixels = {100, 200};
  r.spread.bin_flips = {25, 0};
  r.spread.far_radius = 50;
  r.spread.far_flip_ratio = 0.0;
  r.spread.total_flips = 25;
  return r;
}

TEST(ReportJson, NamesClassesAndRoundTrips) {
  const EvalReport r = sample_report();
  const std::vector<std::string> names{"background", "red", "blue"};
  const std::string text = report_to_json(r, names, "val");
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["split"], "val");
  EXPECT_EQ(j["patch"], "tiny_cnn");
  EXPECT_TRUE(j["per_class_iou"]["red"].is_null());
  EXPECT_DOUBLE_EQ(j["per_class_iou"]["blue"].get<double>(), 0.52);

  const EvalReport back = report_from_json(text);
  EXPECT_EQ(back.model, r.model);
  EXPECT_EQ(back.patch_tag, r.patch_tag);
  EXPECT_DOUBLE_EQ(back.miou, r.miou);
  EXPECT_EQ(back.per_class_iou, r.per_class_iou);
  EXPECT_EQ(back.baseline_miou, r.baseline_miou);
  EXPECT_EQ(back.drop_vs_baseline, r.drop_vs_baseline);
  EXPECT_EQ(back.clean_miou, r.clean_miou);
  EXPECT_EQ(back.pixels_counted, r.pixels_counted);
  EXPECT_EQ(back.spread.bin_flips, r.spread.bin_flips);
  EXPECT_EQ(back.spread.far_radius, 50u);
}

TEST(ReportCsv, OneRowPerClass) {
  const std::string csv = per_class_csv(sample_report(), {"background", "red", "blue"});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,iou");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("red,\n"), std::string::npos);
}

TEST(TextFiles, RoundTripAndErrors) {
  testing::TempDir tmp;
  write_text_file(tmp / "a.txt", "hello\n");
  EXPECT_EQ(read_text_file(tmp / "a.txt"), "hello\n");
  EXPECT_THROW(read_text_file(tmp / "missing.txt"), IoError);
}

}  // namespace
}  // namespace patchforge
