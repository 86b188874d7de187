#include "patchforge/adv_loss.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "patchforge/errors.hpp"

namespace patchforge {

namespace {

void check_logits(const Tensor& logits, const LabelMap& label) {
  if (logits.rank() != 3) throw ShapeMismatch("logits must be [C,H,W], got " + shape_string(logits.shape()));
  if (logits.dim(1) != label.height || logits.dim(2) != label.width) {
    throw ShapeMismatch("logits " + shape_string(logits.shape()) + " do not match label " +
                        std::to_string(label.height) + "x" + std::to_string(label.width));
  }
}

void check_mask(const CorrectnessMask& cmask, const LabelMap& label) {
  if (cmask.height != label.height || cmask.width != label.width) {
    throw ShapeMismatch("correctness mask does not match label shape");
  }
}

// log-sum-exp over the class axis at one pixel.
double log_sum_exp(const Tensor& logits, std::size_t pixel, std::size_t plane) {
  const std::size_t classes = logits.dim(0);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes; ++c) peak = std::max(peak, logits[c * plane + pixel]);
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) sum += std::exp(logits[c * plane + pixel] - peak);
  return peak + std::log(sum);
}

}  // namespace

CorrectnessMask correctness_mask(const Tensor& logits, const LabelMap& label,
                                 const std::optional<PixelRect>& patch_region, std::int32_t ignore_index) {
  check_logits(logits, label);
  const std::size_t classes = logits.dim(0);
  const std::size_t h = label.height;
  const std::size_t w = label.width;
  const std::size_t plane = h * w;
  CorrectnessMask out{h, w, std::vector<std::uint8_t>(plane, 0), std::vector<std::uint8_t>(plane, 0), 0};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const std::int32_t truth = label.values[i];
      if (truth == ignore_index || (patch_region && patch_region->contains(y, x))) {
        out.excluded[i] = 1;
        continue;
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c) {
        if (logits[c * plane + i] > logits[best * plane + i]) best = c;
      }
      if (static_cast<std::int32_t>(best) == truth) {
        out.mask[i] = 1;
        ++out.count;
      }
    }
  }
  return out;
}

double masked_cross_entropy(const Tensor& logits, const LabelMap& label, const CorrectnessMask& cmask) {
  check_logits(logits, label);
  check_mask(cmask, label);
  if (cmask.count == 0) return 0.0;
  const std::size_t plane = label.size();
  double total = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    if (!cmask.mask[i]) continue;
    const auto truth = static_cast<std::size_t>(label.values[i]);
    total += log_sum_exp(logits, i, plane) - logits[truth * plane + i];
  }
  return total / static_cast<double>(cmask.count);
}

LossAndGradient masked_cross_entropy_grad(const Tensor& logits, const LabelMap& label,
                                          const CorrectnessMask& cmask) {
  check_logits(logits, label);
  check_mask(cmask, label);
  LossAndGradient out{0.0, Tensor(logits.shape())};
  if (cmask.count == 0) return out;
  const std::size_t classes = logits.dim(0);
  const std::size_t plane = label.size();
  const double inv = 1.0 / static_cast<double>(cmask.count);
  double total = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    if (!cmask.mask[i]) continue;
    const auto truth = static_cast<std::size_t>(label.values[i]);
    const double lse = log_sum_exp(logits, i, plane);
    total += lse - logits[truth * plane + i];
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(logits[c * plane + i] - lse);
      out.grad_logits[c * plane + i] = inv * (p - (c == truth ? 1.0 : 0.0));
    }
  }
  out.value = total * inv;
  return out;
}

double batch_loss(std::span<const double> per_image_losses) {
  if (per_image_losses.empty()) throw EmptyBatch("batch_loss needs at least one image");
  return std::accumulate(per_image_losses.begin(), per_image_losses.end(), 0.0) /
         static_cast<double>(per_image_losses.size());
}

BatchLoss adversarial_batch_loss(const Tensor& logits, std::span<const LabelMap> labels,
                                 std::span<const std::optional<PixelRect>> patch_regions,
                                 std::int32_t ignore_index) {
  if (logits.rank() != 4) throw ShapeMismatch("batch logits must be [B,C,H,W]");
  const std::size_t n = logits.dim(0);
  if (n == 0) throw EmptyBatch("adversarial loss over an empty batch");
  if (labels.size() != n || patch_regions.size() != n) {
    throw ShapeMismatch("batch of " + std::to_string(n) + " logits needs as many labels and regions");
  }
  BatchLoss out;
  out.grad_logits = Tensor(logits.shape());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const Tensor image_logits = logits.slice(b);
    const CorrectnessMask cmask = correctness_mask(image_logits, labels[b], patch_regions[b], ignore_index);
    LossAndGradient lg = masked_cross_entropy_grad(image_logits, labels[b], cmask);
    for (double& g : lg.grad_logits.values()) g *= inv_n;
    out.grad_logits.set_slice(b, lg.grad_logits);
    out.per_image.push_back(lg.value);
    out.correct_counts.push_back(cmask.count);
  }
  out.value = batch_loss(out.per_image);
  return out;
}

}  // namespace patchforge
