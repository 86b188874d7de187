#include "patchforge/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "patchforge/errors.hpp"

namespace patchforge {

void TransformConfig::validate() const {
  if (!(scale_min > 0.0) || !(scale_min <= scale_max)) {
    throw ConfigError("transform scale range must satisfy 0 < scale_min <= scale_max");
  }
  if (crop_size < 1) throw ConfigError("transform crop_size must be >= 1");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("transform flip_prob must be in [0,1]");
}

std::size_t scaled_extent(std::size_t extent, double scale) {
  const auto scaled = static_cast<long long>(std::llround(static_cast<double>(extent) * scale));
  return static_cast<std::size_t>(std::max(1LL, scaled));
}

TransformSpec sample_transform(Rng& rng, const TransformConfig& cfg, std::size_t image_h, std::size_t image_w) {
  if (image_h < 1 || image_w < 1) throw InvalidSpec("image dimensions must be >= 1");
  TransformSpec spec;
  spec.scale = cfg.scale_min == cfg.scale_max ? cfg.scale_min : rng.uniform(cfg.scale_min, cfg.scale_max);
  spec.flip = cfg.flip_prob > 0.0 && rng.bernoulli(cfg.flip_prob);
  const std::size_t padded_h = std::max(scaled_extent(image_h, spec.scale), cfg.crop_size);
  const std::size_t padded_w = std::max(scaled_extent(image_w, spec.scale), cfg.crop_size);
  spec.crop_row0 = static_cast<std::size_t>(rng.below(padded_h - cfg.crop_size + 1));
  spec.crop_col0 = static_cast<std::size_t>(rng.below(padded_w - cfg.crop_size + 1));
  return spec;
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  const std::size_t channels = image.dim(0);
  const std::size_t in_h = image.dim(1);
  const std::size_t in_w = image.dim(2);
  if (in_h == out_h && in_w == out_w) return image;

  // Half-pixel centres, edge-clamped (align_corners = false).
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      const double src = std::max(0.0, (static_cast<double>(i) + 0.5) * ratio - 0.5);
      const auto lo = std::min(static_cast<std::size_t>(src), in - 1);
      t[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h);
  const auto tx = taps(in_w, out_w);

  Tensor out({channels, out_h, out_w});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const Tap& a = ty[y];
      for (std::size_t x = 0; x < out_w; ++x) {
        const Tap& b = tx[x];
        const double top = image(c, a.lo, b.lo) + (image(c, a.lo, b.hi) - image(c, a.lo, b.lo)) * b.frac;
        const double bottom = image(c, a.hi, b.lo) + (image(c, a.hi, b.hi) - image(c, a.hi, b.lo)) * b.frac;
        // Convex combination; the clamp only absorbs rounding.
        out(c, y, x) = std::clamp(top + (bottom - top) * a.frac, 0.0, 1.0);
      }
    }
  }
  return out;
}

LabelMap resize_nearest(const LabelMap& label, std::size_t out_h, std::size_t out_w) {
  if (label.height == out_h && label.width == out_w) return label;
  LabelMap out(out_h, out_w);
  const double ry = static_cast<double>(label.height) / static_cast<double>(out_h);
  const double rx = static_cast<double>(label.width) / static_cast<double>(out_w);
  std::vector<std::size_t> src_x(out_w);
  for (std::size_t x = 0; x < out_w; ++x) {
    src_x[x] = std::min(static_cast<std::size_t>((static_cast<double>(x) + 0.5) * rx), label.width - 1);
  }
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = std::min(static_cast<std::size_t>((static_cast<double>(y) + 0.5) * ry), label.height - 1);
    for (std::size_t x = 0; x < out_w; ++x) out.at(y, x) = label.at(sy, src_x[x]);
  }
  return out;
}

Tensor flip_horizontal(const Tensor& image) {
  Tensor out(image.shape());
  const std::size_t w = image.dim(2);
  for (std::size_t c = 0; c < image.dim(0); ++c) {
    for (std::size_t y = 0; y < image.dim(1); ++y) {
      for (std::size_t x = 0; x < w; ++x) out(c, y, x) = image(c, y, w - 1 - x);
    }
  }
  return out;
}

LabelMap flip_horizontal(const LabelMap& label) {
  LabelMap out(label.height, label.width);
  for (std::size_t y = 0; y < label.height; ++y) {
    for (std::size_t x = 0; x < label.width; ++x) out.at(y, x) = label.at(y, label.width - 1 - x);
  }
  return out;
}

TransformedSample apply_transform(const Tensor& image, const LabelMap& label, const TransformSpec& spec,
                                  const TransformConfig& cfg) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeMismatch("image must be [3,H,W]");
  if (label.height != image.dim(1) || label.width != image.dim(2)) {
    throw ShapeMismatch("label " + std::to_string(label.height) + "x" + std::to_string(label.width) +
                        " does not match image " + shape_string(image.shape()));
  }
  if (!(spec.scale >= cfg.scale_min && spec.scale <= cfg.scale_max)) {
    throw InvalidSpec("scale " + std::to_string(spec.scale) + " outside configured range");
  }
  const std::size_t sh = scaled_extent(image.dim(1), spec.scale);
  const std::size_t sw = scaled_extent(image.dim(2), spec.scale);
  const std::size_t crop = cfg.crop_size;
  const std::size_t padded_h = std::max(sh, crop);
  const std::size_t padded_w = std::max(sw, crop);
  if (spec.crop_row0 + crop > padded_h || spec.crop_col0 + crop > padded_w) {
    throw InvalidSpec("crop window at (" + std::to_string(spec.crop_row0) + "," + std::to_string(spec.crop_col0) +
                      ") exceeds padded frame " + std::to_string(padded_h) + "x" + std::to_string(padded_w));
  }

  Tensor scaled = resize_bilinear(image, sh, sw);
  LabelMap scaled_label = resize_nearest(label, sh, sw);
  if (spec.flip) {
    scaled = flip_horizontal(scaled);
    scaled_label = flip_horizontal(scaled_label);
  }

  // Content is anchored top-left; padding fills bottom/right.
  TransformedSample out{Tensor({3, crop, crop}), LabelMap(crop, crop, cfg.pad_label_value)};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < crop; ++y) {
      const std::size_t sy = spec.crop_row0 + y;
      for (std::size_t x = 0; x < crop; ++x) {
        const std::size_t sx = spec.crop_col0 + x;
        out.image(c, y, x) = (sy < sh && sx < sw) ? scaled(c, sy, sx) : cfg.pad_image_value[c];
      }
    }
  }
  for (std::size_t y = 0; y < crop; ++y) {
    const std::size_t sy = spec.crop_row0 + y;
    if (sy >= sh) continue;
    for (std::size_t x = 0; x < crop; ++x) {
      const std::size_t sx = spec.crop_col0 + x;
      if (sx < sw) out.label.at(y, x) = scaled_label.at(sy, sx);
    }
  }
  return out;
}

}  // namespace patchforge
