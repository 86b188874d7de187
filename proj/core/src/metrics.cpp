#include "patchforge/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "patchforge/errors.hpp"

namespace patchforge {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(int truth) const {
  std::uint64_t s = 0;
  for (int p = 0; p < num_classes_; ++p) s += count(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(int pred) const {
  std::uint64_t s = 0;
  for (int g = 0; g < num_classes_; ++g) s += count(g, pred);
  return s;
}

void ConfusionMatrix::add(int truth, int pred, std::uint64_t n) {
  if (truth < 0 || truth >= num_classes_ || pred < 0 || pred >= num_classes_) {
    throw DomainError("class id out of range: truth=" + std::to_string(truth) + " pred=" + std::to_string(pred));
  }
  counts_[static_cast<std::size_t>(truth) * num_classes_ + pred] += n;
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw ShapeMismatch("cannot merge confusion matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

void update_confusion(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& label,
                      const std::optional<PixelRect>& exclude_region, std::int32_t ignore_index) {
  if (pred.height != label.height || pred.width != label.width) {
    throw ShapeMismatch("prediction and label shapes differ");
  }
  for (std::size_t y = 0; y < label.height; ++y) {
    for (std::size_t x = 0; x < label.width; ++x) {
      const std::int32_t truth = label.at(y, x);
      if (truth == ignore_index) continue;
      if (exclude_region && exclude_region->contains(y, x)) continue;
      cm.add(truth, pred.at(y, x));
    }
  }
}

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(cm.num_classes()));
  for (int c = 0; c < cm.num_classes(); ++c) {
    const std::uint64_t inter = cm.count(c, c);
    const std::uint64_t uni = cm.row_sum(c) + cm.col_sum(c) - inter;
    if (uni > 0) out[static_cast<std::size_t>(c)] = static_cast<double>(inter) / static_cast<double>(uni);
  }
  return out;
}

double miou(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int defined = 0;
  for (const auto& iou : iou_per_class(cm)) {
    if (!iou) continue;
    sum += *iou;
    ++defined;
  }
  if (defined == 0) throw NoDefinedClasses("no class appears in prediction or label");
  return sum / defined;
}

LabelMap argmax_labels(const Tensor& logits) {
  if (logits.rank() != 3) throw ShapeMismatch("argmax_labels expects [C,H,W]");
  const std::size_t classes = logits.dim(0);
  LabelMap out(logits.dim(1), logits.dim(2));
  const std::size_t plane = out.size();
  for (std::size_t i = 0; i < plane; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits[c * plane + i] > logits[best * plane + i]) best = c;
    }
    out.values[i] = static_cast<std::int32_t>(best);
  }
  return out;
}

std::size_t chebyshev_distance(const PixelRect& rect, std::size_t r, std::size_t c) {
  const std::size_t dr = r < rect.row0 ? rect.row0 - r : (r >= rect.row1 ? r - (rect.row1 - 1) : 0);
  const std::size_t dc = c < rect.col0 ? rect.col0 - c : (c >= rect.col1 ? c - (rect.col1 - 1) : 0);
  return std::max(dr, dc);
}

SpreadCounts& SpreadCounts::merge(const SpreadCounts& other) {
  if (other.bin_width != bin_width || other.far_radius != far_radius) {
    throw ShapeMismatch("cannot merge spread counts with different binning");
  }
  if (other.pixels.size() > pixels.size()) {
    pixels.resize(other.pixels.size(), 0);
    flips.resize(other.flips.size(), 0);
  }
  for (std::size_t k = 0; k < other.pixels.size(); ++k) {
    pixels[k] += other.pixels[k];
    flips[k] += other.flips[k];
  }
  far_flips += other.far_flips;
  far_pixels += other.far_pixels;
  return *this;
}

SpreadCounts spread_counts(const LabelMap& pred_clean, const LabelMap& pred_attacked, const PixelRect& patch_region,
                           std::size_t bin_width, std::size_t far_radius) {
  if (pred_clean.height != pred_attacked.height || pred_clean.width != pred_attacked.width) {
    throw ShapeMismatch("clean and attacked predictions differ in shape");
  }
  if (patch_region.row1 > pred_clean.height || patch_region.col1 > pred_clean.width || patch_region.empty()) {
    throw ShapeMismatch("patch region lies outside the prediction grid");
  }
  if (bin_width == 0) throw ConfigError("spread bin width must be >= 1");
  SpreadCounts out;
  out.bin_width = bin_width;
  out.far_radius = far_radius;
  for (std::size_t y = 0; y < pred_clean.height; ++y) {
    for (std::size_t x = 0; x < pred_clean.width; ++x) {
      const std::size_t d = chebyshev_distance(patch_region, y, x);
      if (d == 0) continue;
      const std::size_t bin = (d - 1) / bin_width;
      if (bin >= out.pixels.size()) {
        out.pixels.resize(bin + 1, 0);
        out.flips.resize(bin + 1, 0);
      }
      const bool flipped = pred_clean.at(y, x) != pred_attacked.at(y, x);
      ++out.pixels[bin];
      if (d > far_radius) ++out.far_pixels;
      if (flipped) {
        ++out.flips[bin];
        if (d > far_radius) ++out.far_flips;
      }
    }
  }
  return out;
}

SpreadProfile finalize_spread(const SpreadCounts& counts) {
  SpreadProfile p;
  p.far_radius = counts.far_radius;
  p.bin_pixels = counts.pixels;
  p.bin_flips = counts.flips;
  for (std::size_t k = 0; k <= counts.pixels.size(); ++k) p.bin_edges.push_back(k * counts.bin_width);
  for (std::size_t k = 0; k < counts.pixels.size(); ++k) {
    p.flip_rate.push_back(counts.pixels[k] ? static_cast<double>(counts.flips[k]) / counts.pixels[k] : 0.0);
  }
  p.total_flips = std::accumulate(counts.flips.begin(), counts.flips.end(), std::uint64_t{0});
  p.far_flip_ratio = p.total_flips ? static_cast<double>(counts.far_flips) / static_cast<double>(p.total_flips) : 0.0;
  return p;
}

SpreadProfile spread_profile(const LabelMap& pred_clean, const LabelMap& pred_attacked, const PixelRect& patch_region,
                             std::size_t bin_width, std::optional<std::size_t> far_radius) {
  const std::size_t radius = far_radius.value_or(2 * std::max(patch_region.height(), patch_region.width()));
  return finalize_spread(spread_counts(pred_clean, pred_attacked, patch_region, bin_width, radius));
}

}  // namespace patchforge
