#ifndef PATCHFORGE_EVALSUITE_HPP_
#define PATCHFORGE_EVALSUITE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchforge/metrics.hpp"
#include "patchforge/patch.hpp"

namespace patchforge {

class Dataset;
class ModelAdapter;

struct EvalOptions {
  std::size_t spread_subset = 20;  // 0 = whole split
  std::size_t spread_bin_width = 8;
  double far_radius_factor = 2.0;  // r* = factor * patch side
  std::uint64_t seed = 0;
  std::size_t max_images = 0;  // 0 = whole split
  PlacementSpec placement;
};

struct EvalReport {
  std::string model;
  std::string patch_tag;
  double miou = 0.0;
  std::vector<std::optional<double>> per_class_iou;
  std::optional<double> baseline_miou;
  std::optional<double> drop_vs_baseline;
  SpreadProfile spread;
  std::size_t n_images = 0;
  std::uint64_t pixels_counted = 0;
  std::optional<double> clean_miou;  // over the spread subset
};

// Native-resolution evaluation with no transforms: paste at `placement`,
// accumulate one confusion matrix over the split excluding patch and ignore
// pixels.
EvalReport evaluate_patch(const ModelAdapter& adapter, const Patch& patch, const Dataset& val,
                          const EvalOptions& options = {}, const std::string& patch_tag = "",
                          std::optional<double> baseline_miou = std::nullopt);

// Confusion matrix of attacked predictions over the given indices.
ConfusionMatrix attacked_confusion(const ModelAdapter& adapter, const Patch& patch, const Dataset& dataset,
                                   std::span<const std::size_t> indices, const PlacementSpec& placement = {});

struct TransferMatrix {
  std::vector<std::string> row_labels;  // row 0 is the random baseline
  std::vector<std::string> col_labels;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<EvalReport>> reports;
  std::size_t baseline_row = 0;
  std::uint64_t baseline_seed = 0;

  double drop(std::size_t row, std::size_t col) const { return values[baseline_row][col] - values[row][col]; }
};

struct NamedPatch {
  std::string tag;
  Patch patch;
};

struct NamedAdapter {
  std::string name;
  const ModelAdapter* adapter = nullptr;
};

TransferMatrix transfer_matrix(std::span<const NamedPatch> patches, std::span<const NamedAdapter> adapters,
                               const Dataset& dataset, const EvalOptions& options = {},
                               std::uint64_t baseline_seed = 0);

// Header = model names, first column = patch tags, 4 decimals per cell.
std::string transfer_matrix_csv(const TransferMatrix& matrix);

// For every patch whose tag names a column, its own-model drop must be at
// least the drop it causes on every other model, and at least the drop any
// other patch causes on that model. Returns the violated pairs.
std::vector<std::string> diagonal_violations(const TransferMatrix& matrix);

struct DecayPoint {
  int epoch = 0;
  double miou = 0.0;
  std::vector<std::optional<double>> per_class_iou;
};

// One point per patch in the stream, evaluated on a fixed subset.
std::vector<DecayPoint> decay_logger(const ModelAdapter& adapter, std::span<const Patch> patch_stream,
                                     const Dataset& dataset, std::span<const std::size_t> subset);

DecayPoint evaluate_subset(const ModelAdapter& adapter, const Patch& patch, const Dataset& dataset,
                           std::span<const std::size_t> subset, int epoch = 0);

}  // namespace patchforge

#endif  // PATCHFORGE_EVALSUITE_HPP_
