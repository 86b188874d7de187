#ifndef PATCHFORGE_IMAGE_IO_HPP_
#define PATCHFORGE_IMAGE_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "patchforge/tensor.hpp"

namespace patchforge {

// 8-bit interleaved pixels, row-major.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;
};

Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

// value = round(255 * v), v clamped to [0,1].
Image8 to_image8(const Tensor& image);
Tensor from_image8(const Image8& image);  // /255, gray expanded to 3 channels

Image8 label_to_image8(const LabelMap& label);
LabelMap label_from_image8(const Image8& image);

}  // namespace patchforge

#endif  // PATCHFORGE_IMAGE_IO_HPP_
