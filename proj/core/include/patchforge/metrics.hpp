#ifndef PATCHFORGE_METRICS_HPP_
#define PATCHFORGE_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "patchforge/tensor.hpp"

namespace patchforge {

// counts[g][p] = pixels with ground truth g predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return num_classes_; }
  std::uint64_t count(int truth, int pred) const {
    return counts_[static_cast<std::size_t>(truth) * num_classes_ + pred];
  }
  std::uint64_t total() const;
  std::uint64_t row_sum(int truth) const;
  std::uint64_t col_sum(int pred) const;

  void add(int truth, int pred, std::uint64_t n = 1);
  ConfusionMatrix& merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix& other) const = default;

 private:
  int num_classes_;
  std::vector<std::uint64_t> counts_;
};

// Counts every pixel outside `exclude_region` whose label is not ignore_index.
void update_confusion(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& label,
                      const std::optional<PixelRect>& exclude_region, std::int32_t ignore_index);

// nullopt where the class is absent from both prediction and label.
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);

// Mean over defined classes; throws NoDefinedClasses when none.
double miou(const ConfusionMatrix& cm);

// Per-pixel argmax over [C,H,W] logits, lowest index on ties.
LabelMap argmax_labels(const Tensor& logits);

// Chebyshev distance from (r,c) to the nearest pixel of `rect` (0 inside).
std::size_t chebyshev_distance(const PixelRect& rect, std::size_t r, std::size_t c);

// Raw per-bin counts. Bin k holds off-patch pixels at distance in
// (k*bin_width, (k+1)*bin_width]. Accumulates across images.
struct SpreadCounts {
  std::size_t bin_width = 1;
  std::size_t far_radius = 0;
  std::vector<std::uint64_t> pixels;
  std::vector<std::uint64_t> flips;
  std::uint64_t far_flips = 0;
  std::uint64_t far_pixels = 0;

  SpreadCounts& merge(const SpreadCounts& other);
};

struct SpreadProfile {
  std::vector<std::size_t> bin_edges;  // bins are (edge[k], edge[k+1]]
  std::vector<double> flip_rate;
  std::vector<std::uint64_t> bin_pixels;
  std::vector<std::uint64_t> bin_flips;
  std::size_t far_radius = 0;
  // Fraction of flipped pixels at distance > far_radius (0 when nothing flipped).
  double far_flip_ratio = 0.0;
  std::uint64_t total_flips = 0;
};

SpreadCounts spread_counts(const LabelMap& pred_clean, const LabelMap& pred_attacked, const PixelRect& patch_region,
                           std::size_t bin_width, std::size_t far_radius);
SpreadProfile finalize_spread(const SpreadCounts& counts);

// r* defaults to twice the patch side.
SpreadProfile spread_profile(const LabelMap& pred_clean, const LabelMap& pred_attacked, const PixelRect& patch_region,
                             std::size_t bin_width, std::optional<std::size_t> far_radius = std::nullopt);

}  // namespace patchforge

#endif  // PATCHFORGE_METRICS_HPP_
