#include "patchforge/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "patchforge/datasets.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/model_zoo.hpp"

namespace patchforge {

namespace {

constexpr std::uint64_t kSpreadKey = 0x737072656164;  // "spread"
constexpr std::uint64_t kBaselineKey = 0x72616e64;    // "rand"

std::size_t eval_count(const Dataset& d, std::size_t max_images) {
  return max_images ? std::min(max_images, d.size()) : d.size();
}

}  // namespace

EvalReport evaluate_patch(const ModelAdapter& adapter, const Patch& patch, const Dataset& val,
                          const EvalOptions& options, const std::string& patch_tag,
                          std::optional<double> baseline_miou) {
  const std::size_t n = eval_count(val, options.max_images);
  if (n == 0) throw EmptyDataset("evaluation needs a non-empty split");
  if (options.spread_bin_width == 0) throw ConfigError("spread bin width must be >= 1");
  if (!(options.far_radius_factor > 0.0)) throw ConfigError("far radius factor must be > 0");

  const std::vector<std::size_t> spread_idx =
      seeded_subset(n, options.spread_subset ? options.spread_subset : n, mix_seed(options.seed, kSpreadKey));
  const std::set<std::size_t> spread_set(spread_idx.begin(), spread_idx.end());
  const auto far_radius = static_cast<std::size_t>(
      std::llround(options.far_radius_factor * static_cast<double>(std::max(patch.height(), patch.width()))));

  ConfusionMatrix attacked(adapter.num_classes());
  ConfusionMatrix clean(adapter.num_classes());
  SpreadCounts spread{.bin_width = options.spread_bin_width, .far_radius = far_radius};
  const std::int32_t ignore = adapter.ignore_index();
  for (std::size_t i = 0; i < n; ++i) {
    const SampleRecord rec = val.get(i);
    const AppliedPatch ap = apply_patch(rec.image, patch, options.placement);
    const LabelMap pred = predict_labels(adapter, ap.image);
    update_confusion(attacked, pred, rec.label, ap.region, ignore);
    if (spread_set.contains(i)) {
      const LabelMap clean_pred = predict_labels(adapter, rec.image);
      update_confusion(clean, clean_pred, rec.label, ap.region, ignore);
      spread.merge(spread_counts(clean_pred, pred, ap.region, options.spread_bin_width, far_radius));
    }
  }

  EvalReport report;
  report.model = adapter.name();
  report.patch_tag = patch_tag;
  report.miou = miou(attacked);
  report.per_class_iou = iou_per_class(attacked);
  report.baseline_miou = baseline_miou;
  if (baseline_miou) report.drop_vs_baseline = *baseline_miou - report.miou;
  report.spread = finalize_spread(spread);
  report.n_images = n;
  report.pixels_counted = attacked.total();
  if (clean.total() > 0) report.clean_miou = miou(clean);
  return report;
}

ConfusionMatrix attacked_confusion(const ModelAdapter& adapter, const Patch& patch, const Dataset& dataset,
                                   std::span<const std::size_t> indices, const PlacementSpec& placement) {
  ConfusionMatrix cm(adapter.num_classes());
  for (std::size_t i : indices) {
    const SampleRecord rec = dataset.get(i);
    const AppliedPatch ap = apply_patch(rec.image, patch, placement);
    update_confusion(cm, predict_labels(adapter, ap.image), rec.label, ap.region, adapter.ignore_index());
  }
  return cm;
}

TransferMatrix transfer_matrix(std::span<const NamedPatch> patches, std::span<const NamedAdapter> adapters,
                               const Dataset& dataset, const EvalOptions& options, std::uint64_t baseline_seed) {
  if (patches.empty()) throw ConfigError("transfer matrix needs at least one patch");
  if (adapters.empty()) throw ConfigError("transfer matrix needs at least one model");
  std::set<std::string> seen;
  for (const NamedPatch& p : patches) {
    if (p.tag == "random") throw DuplicateName("patch tag 'random' is reserved for the baseline row");
    if (!seen.insert(p.tag).second) throw DuplicateName("duplicate patch tag '" + p.tag + "'");
  }
  seen.clear();
  for (const NamedAdapter& a : adapters) {
    if (a.adapter == nullptr) throw ConfigError("model '" + a.name + "' has no adapter");
    if (!seen.insert(a.name).second) throw DuplicateName("duplicate model name '" + a.name + "'");
  }

  // One seeded noise patch, sized like the first patch.
  const Patch baseline = random_patch(patches.front().patch.height(), patches.front().patch.width(),
                                      mix_seed(baseline_seed, kBaselineKey));
  TransferMatrix m;
  m.baseline_row = 0;
  m.baseline_seed = baseline_seed;
  m.row_labels.push_back("random");
  for (const NamedPatch& p : patches) m.row_labels.push_back(p.tag);
  for (const NamedAdapter& a : adapters) m.col_labels.push_back(a.name);

  const std::size_t rows = patches.size() + 1;
  m.values.assign(rows, std::vector<double>(adapters.size(), 0.0));
  m.reports.assign(rows, std::vector<EvalReport>(adapters.size()));
  for (std::size_t c = 0; c < adapters.size(); ++c) {
    m.reports[0][c] = evaluate_patch(*adapters[c].adapter, baseline, dataset, options, "random");
    m.reports[0][c].model = adapters[c].name;
    const double base = m.reports[0][c].miou;
    m.reports[0][c].baseline_miou = base;
    m.reports[0][c].drop_vs_baseline = 0.0;
    m.values[0][c] = base;
    for (std::size_t r = 1; r < rows; ++r) {
      m.reports[r][c] = evaluate_patch(*adapters[c].adapter, patches[r - 1].patch, dataset, options,
                                       patches[r - 1].tag, base);
      m.reports[r][c].model = adapters[c].name;
      m.values[r][c] = m.reports[r][c].miou;
    }
  }
  return m;
}

std::string transfer_matrix_csv(const TransferMatrix& matrix) {
  std::string out = "patch";
  for (const std::string& c : matrix.col_labels) out += "," + c;
  out += "\n";
  for (std::size_t r = 0; r < matrix.row_labels.size(); ++r) {
    out += matrix.row_labels[r];
    for (double v : matrix.values[r]) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.4f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::vector<std::string> diagonal_violations(const TransferMatrix& matrix) {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < matrix.row_labels.size(); ++r) {
    if (r == matrix.baseline_row) continue;
    const auto it = std::find(matrix.col_labels.begin(), matrix.col_labels.end(), matrix.row_labels[r]);
    if (it == matrix.col_labels.end()) continue;
    const auto c = static_cast<std::size_t>(it - matrix.col_labels.begin());
    const double self = matrix.drop(r, c);
    for (std::size_t c2 = 0; c2 < matrix.col_labels.size(); ++c2) {
      if (c2 != c && matrix.drop(r, c2) > self) {
        out.push_back(matrix.row_labels[r] + " hurts " + matrix.col_labels[c2] + " more than its own model");
      }
    }
    for (std::size_t r2 = 0; r2 < matrix.row_labels.size(); ++r2) {
      if (r2 != r && r2 != matrix.baseline_row && matrix.drop(r2, c) > self) {
        out.push_back(matrix.row_labels[r2] + " hurts " + matrix.col_labels[c] + " more than " +
                      matrix.row_labels[r]);
      }
    }
  }
  return out;
}

DecayPoint evaluate_subset(const ModelAdapter& adapter, const Patch& patch, const Dataset& dataset,
                           std::span<const std::size_t> subset, int epoch) {
  if (subset.empty()) throw EmptyDataset("decay evaluation needs a non-empty subset");
  const ConfusionMatrix cm = attacked_confusion(adapter, patch, dataset, subset);
  return {epoch, miou(cm), iou_per_class(cm)};
}

std::vector<DecayPoint> decay_logger(const ModelAdapter& adapter, std::span<const Patch> patch_stream,
                                     const Dataset& dataset, std::span<const std::size_t> subset) {
  std::vector<DecayPoint> out;
  for (std::size_t i = 0; i < patch_stream.size(); ++i) {
    out.push_back(evaluate_subset(adapter, patch_stream[i], dataset, subset, static_cast<int>(i)));
  }
  return out;
}

}  // namespace patchforge
