#ifndef PATCHFORGE_TRANSFORMS_HPP_
#define PATCHFORGE_TRANSFORMS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>

#include "patchforge/rng.hpp"
#include "patchforge/tensor.hpp"

namespace patchforge {

struct TransformConfig {
  double scale_min = 0.5;
  double scale_max = 2.0;
  std::size_t crop_size = 1024;
  double flip_prob = 0.5;
  // Per-channel mean of the ImageNet statistics used by the Cityscapes
  // training scripts; acts as the dataset mean for padding.
  std::array<double, 3> pad_image_value{0.485, 0.456, 0.406};
  std::int32_t pad_label_value = 255;

  void validate() const;
};

// One draw t ~ T. Crop origin is expressed in the scaled, flipped and padded
// frame.
struct TransformSpec {
  double scale = 1.0;
  bool flip = false;
  std::size_t crop_row0 = 0;
  std::size_t crop_col0 = 0;

  bool operator==(const TransformSpec& other) const = default;
};

struct TransformedSample {
  Tensor image;    // [3,S,S]
  LabelMap label;  // [S,S]
};

std::size_t scaled_extent(std::size_t extent, double scale);

TransformSpec sample_transform(Rng& rng, const TransformConfig& cfg, std::size_t image_h,
                               std::size_t image_w);

// scale -> flip -> pad (bottom/right) -> crop.
TransformedSample apply_transform(const Tensor& image, const LabelMap& label, const TransformSpec& spec,
                                  const TransformConfig& cfg);

// Building blocks, exposed for tests and benchmarks.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);
LabelMap resize_nearest(const LabelMap& label, std::size_t out_h, std::size_t out_w);
Tensor flip_horizontal(const Tensor& image);
LabelMap flip_horizontal(const LabelMap& label);

}  // namespace patchforge

#endif  // PATCHFORGE_TRANSFORMS_HPP_
