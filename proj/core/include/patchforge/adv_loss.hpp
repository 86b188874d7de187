#ifndef PATCHFORGE_ADV_LOSS_HPP_
#define PATCHFORGE_ADV_LOSS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "patchforge/tensor.hpp"

namespace patchforge {

// Omega_x for one image. Every pixel is exactly one of: correct (in mask),
// incorrect, or excluded (patch region or ignore label).
struct CorrectnessMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> mask;
  std::vector<std::uint8_t> excluded;
  std::size_t count = 0;
};

// Logits are [C,H,W] for a single image. Argmax ties go to the lowest class.
CorrectnessMask correctness_mask(const Tensor& logits, const LabelMap& label,
                                 const std::optional<PixelRect>& patch_region, std::int32_t ignore_index);

// Mean over Omega_x of -log softmax(logits)[label]. Zero when Omega_x is empty.
double masked_cross_entropy(const Tensor& logits, const LabelMap& label, const CorrectnessMask& cmask);

struct LossAndGradient {
  double value = 0.0;
  Tensor grad_logits;  // same shape as the logits
};

// Same value as masked_cross_entropy plus its gradient w.r.t. the logits,
// treating the mask as a constant.
LossAndGradient masked_cross_entropy_grad(const Tensor& logits, const LabelMap& label,
                                          const CorrectnessMask& cmask);

double batch_loss(std::span<const double> per_image_losses);

// Adversarial objective over a batch: logits [B,C,H,W], one label and patch
// region per image. Masks are recomputed from these logits. The returned
// gradient is that of the batch mean.
struct BatchLoss {
  double value = 0.0;
  std::vector<double> per_image;
  std::vector<std::size_t> correct_counts;
  Tensor grad_logits;
};

BatchLoss adversarial_batch_loss(const Tensor& logits, std::span<const LabelMap> labels,
                                 std::span<const std::optional<PixelRect>> patch_regions,
                                 std::int32_t ignore_index);

}  // namespace patchforge

#endif  // PATCHFORGE_ADV_LOSS_HPP_
