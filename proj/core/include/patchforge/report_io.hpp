#ifndef PATCHFORGE_REPORT_IO_HPP_
#define PATCHFORGE_REPORT_IO_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "patchforge/evalsuite.hpp"
#include "patchforge/metrics.hpp"
#include "patchforge/trainer.hpp"

namespace patchforge {

// history.json: {model, class_names, records: [{epoch, mean_loss, eval_miou, per_class_iou, wall_time_s}]}.
std::string history_to_json(const TrainHistory& history);
TrainHistory history_from_json(const std::string& text);

// {model, patch, split, miou, per_class_iou: {name: value|null}, pixels_counted, spread, ...}
std::string report_to_json(const EvalReport& report, const std::vector<std::string>& class_names,
                           const std::string& split);
EvalReport report_from_json(const std::string& text);

std::string spread_to_json(const SpreadProfile& spread);

// One row per class: class,iou
std::string per_class_csv(const EvalReport& report, const std::vector<std::string>& class_names);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace patchforge

#endif  // PATCHFORGE_REPORT_IO_HPP_
