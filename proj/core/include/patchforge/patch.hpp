#ifndef PATCHFORGE_PATCH_HPP_
#define PATCHFORGE_PATCH_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "patchforge/tensor.hpp"

namespace patchforge {

inline constexpr int kPatchFormatVersion = 1;

struct PatchMeta {
  std::string source_model = "random";
  int train_epochs = 0;
  double step_size = 0.0;
  std::uint64_t seed = 0;
  std::string created_utc;
  int format_version = kPatchFormatVersion;

  bool operator==(const PatchMeta& other) const = default;
};

// Unconstrained patch-shaped values, e.g. the result of an ascent step
// before clipping. Layout is [3,h,w] row-major.
struct PatchDraft {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;
  PatchMeta meta;
};

// The adversarial pixel block. Values live in unit RGB space and every entry
// is in [0,1]; shape never changes after construction.
class Patch {
 public:
  Patch(std::size_t height, std::size_t width, std::vector<float> values, PatchMeta meta = {});

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * height_ + y) * width_ + x];
  }
  const PatchMeta& meta() const { return meta_; }
  void set_meta(PatchMeta meta);

  bool operator==(const Patch& other) const = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<float> values_;
  PatchMeta meta_;
};

enum class PlacementMode { kCenter };

struct PlacementSpec {
  PlacementMode mode = PlacementMode::kCenter;

  PixelRect resolved_region(std::size_t image_h, std::size_t image_w, std::size_t patch_h,
                            std::size_t patch_w) const;
};

struct AppliedPatch {
  Tensor image;
  PixelRect region;
};

// x o I + P delta: pixels inside the placement region are replaced by the
// patch, everything else is copied bit-for-bit.
AppliedPatch apply_patch(const Tensor& image, const Patch& patch, const PlacementSpec& placement = {});

// Pastes into `image` in place; used on hot paths that already own a copy.
PixelRect paste_patch(Tensor& image, const Patch& patch, const PlacementSpec& placement = {});

Patch clip_patch(const PatchDraft& draft);
Patch clip_patch(const Patch& patch);

Patch random_patch(std::size_t height, std::size_t width, std::uint64_t seed);

// `<dir>` is the artifact directory, conventionally named `<tag>.apf`.
void save_patch(const Patch& patch, const std::filesystem::path& dir);
Patch load_patch(const std::filesystem::path& dir);

// Copies the [3,h,w] block under `region` out of an image as a patch.
Patch extract_patch(const Tensor& image, const PixelRect& region, PatchMeta meta = {});

std::string utc_timestamp_now();

}  // namespace patchforge

#endif  // PATCHFORGE_PATCH_HPP_
