#include "patchforge/report_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "patchforge/errors.hpp"

namespace patchforge {

namespace {

using Json = nlohmann::ordered_json;

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

Json spread_json(const SpreadProfile& s) {
  return Json{{"bin_edges", s.bin_edges},   {"flip_rate", s.flip_rate},         {"bin_pixels", s.bin_pixels},
              {"bin_flips", s.bin_flips},   {"far_radius", s.far_radius},       {"far_flip_ratio", s.far_flip_ratio},
              {"total_flips", s.total_flips}};
}

SpreadProfile spread_from(const Json& j) {
  SpreadProfile s;
  s.bin_edges = j.at("bin_edges").get<std::vector<std::size_t>>();
  s.flip_rate = j.at("flip_rate").get<std::vector<double>>();
  s.bin_pixels = j.at("bin_pixels").get<std::vector<std::uint64_t>>();
  s.bin_flips = j.at("bin_flips").get<std::vector<std::uint64_t>>();
  s.far_radius = j.at("far_radius").get<std::size_t>();
  s.far_flip_ratio = j.at("far_flip_ratio").get<double>();
  s.total_flips = j.at("total_flips").get<std::uint64_t>();
  return s;
}

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

std::string history_to_json(const TrainHistory& history) {
  Json arr = Json::array();
  for (const EpochRecord& r : history.records) {
    Json per_class = Json::array();
    for (const auto& v : r.per_class_iou) per_class.push_back(optional_json(v));
    arr.push_back(Json{{"epoch", r.epoch},
                       {"mean_loss", optional_json(r.mean_loss)},
                       {"eval_miou", optional_json(r.eval_miou)},
                       {"per_class_iou", per_class},
                       {"wall_time_s", r.wall_time_s}});
  }
  const Json doc{{"model", history.model}, {"class_names", history.class_names}, {"records", arr}};
  return doc.dump(2) + "\n";
}

TrainHistory history_from_json(const std::string& text) {
  const Json doc = parse(text);
  if (!doc.is_object()) throw FormatError("history must be a JSON object");
  TrainHistory h;
  try {
    h.model = doc.at("model").get<std::string>();
    h.class_names = doc.at("class_names").get<std::vector<std::string>>();
    for (const Json& j : doc.at("records")) {
      EpochRecord r;
      r.epoch = j.at("epoch").get<int>();
      r.mean_loss = optional_from(j.at("mean_loss"));
      r.eval_miou = optional_from(j.at("eval_miou"));
      for (const Json& v : j.at("per_class_iou")) r.per_class_iou.push_back(optional_from(v));
      r.wall_time_s = j.at("wall_time_s").get<double>();
      h.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed history: ") + e.what());
  }
  return h;
}

std::string report_to_json(const EvalReport& report, const std::vector<std::string>& class_names,
                           const std::string& split) {
  Json per_class = Json::object();
  for (std::size_t i = 0; i < report.per_class_iou.size(); ++i) {
    const std::string name = i < class_names.size() ? class_names[i] : "class_" + std::to_string(i);
    per_class[name] = optional_json(report.per_class_iou[i]);
  }
  Json j{{"model", report.model},
         {"patch", report.patch_tag},
         {"split", split},
         {"miou", report.miou},
         {"per_class_iou", per_class},
         {"baseline_miou", optional_json(report.baseline_miou)},
         {"drop_vs_baseline", optional_json(report.drop_vs_baseline)},
         {"clean_miou", optional_json(report.clean_miou)},
         {"n_images", report.n_images},
         {"pixels_counted", report.pixels_counted},
         {"spread", spread_json(report.spread)}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  const Json j = parse(text);
  EvalReport r;
  try {
    r.model = j.at("model").get<std::string>();
    r.patch_tag = j.at("patch").get<std::string>();
    r.miou = j.at("miou").get<double>();
    for (const auto& [_, v] : j.at("per_class_iou").items()) r.per_class_iou.push_back(optional_from(v));
    r.baseline_miou = optional_from(j.at("baseline_miou"));
    r.drop_vs_baseline = optional_from(j.at("drop_vs_baseline"));
    r.clean_miou = optional_from(j.at("clean_miou"));
    r.n_images = j.at("n_images").get<std::size_t>();
    r.pixels_counted = j.at("pixels_counted").get<std::uint64_t>();
    r.spread = spread_from(j.at("spread"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string spread_to_json(const SpreadProfile& spread) { return spread_json(spread).dump(2) + "\n"; }

std::string per_class_csv(const EvalReport& report, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "class,iou\n";
  for (std::size_t i = 0; i < report.per_class_iou.size(); ++i) {
    os << (i < class_names.size() ? class_names[i] : "class_" + std::to_string(i)) << ',';
    if (report.per_class_iou[i]) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", *report.per_class_iou[i]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace patchforge
