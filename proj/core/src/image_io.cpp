#include "patchforge/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>

#include "patchforge/errors.hpp"

namespace patchforge {

Image8 read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + png.message);
  }
  // Gray stays gray (label masks); everything else is decoded to RGB.
  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image8 out;
  out.width = png.width;
  out.height = png.height;
  out.channels = gray ? 1 : 3;
  out.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw IoError("write_png supports 1 or 3 channels");
  if (image.pixels.size() != image.width * image.height * image.channels) throw IoError("image buffer size mismatch");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
  }
}

Image8 to_image8(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeMismatch("to_image8 expects [3,H,W]");
  Image8 out{image.dim(2), image.dim(1), 3, {}};
  out.pixels.resize(out.width * out.height * 3);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image(c, y, x), 0.0, 1.0);
        out.pixels[(y * out.width + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
    }
  }
  return out;
}

Tensor from_image8(const Image8& image) {
  Tensor out({3, image.height, image.width});
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src = image.channels == 3 ? c : 0;
        out(c, y, x) = image.pixels[(y * image.width + x) * image.channels + src] / 255.0;
      }
    }
  }
  return out;
}

Image8 label_to_image8(const LabelMap& label) {
  Image8 out{label.width, label.height, 1, std::vector<std::uint8_t>(label.size())};
  for (std::size_t i = 0; i < label.size(); ++i) {
    const auto v = label.values[i];
    if (v < 0 || v > 255) throw DomainError("label value does not fit 8 bits: " + std::to_string(v));
    out.pixels[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

LabelMap label_from_image8(const Image8& image) {
  if (image.channels != 1) throw LayoutError("label PNG must be single-channel");
  LabelMap out(image.height, image.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = image.pixels[i];
  return out;
}

}  // namespace patchforge
