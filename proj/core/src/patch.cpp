#include "patchforge/patch.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "patchforge/errors.hpp"
#include "patchforge/image_io.hpp"
#include "patchforge/rng.hpp"

namespace patchforge {

namespace fs = std::filesystem;
using nlohmann::json;

Patch::Patch(std::size_t height, std::size_t width, std::vector<float> values, PatchMeta meta)
    : height_(height), width_(width), values_(std::move(values)), meta_(std::move(meta)) {
  if (height_ == 0 || width_ == 0) throw DomainError("patch extent must be at least 1x1");
  if (values_.size() != 3 * height_ * width_) {
    throw ShapeMismatch("patch " + std::to_string(height_) + "x" + std::to_string(width_) + " needs " +
                        std::to_string(3 * height_ * width_) + " values, got " + std::to_string(values_.size()));
  }
  for (float v : values_) {
    // NaN fails both comparisons and is rejected too.
    if (!(v >= 0.0f && v <= 1.0f)) throw DomainError("patch value outside [0,1]: " + std::to_string(v));
  }
}

void Patch::set_meta(PatchMeta meta) { meta_ = std::move(meta); }

PixelRect PlacementSpec::resolved_region(std::size_t image_h, std::size_t image_w, std::size_t patch_h,
                                         std::size_t patch_w) const {
  if (patch_h > image_h || patch_w > image_w) {
    throw PatchTooLarge("patch " + std::to_string(patch_h) + "x" + std::to_string(patch_w) +
                        " does not fit image " + std::to_string(image_h) + "x" + std::to_string(image_w));
  }
  const std::size_t row0 = (image_h - patch_h) / 2;
  const std::size_t col0 = (image_w - patch_w) / 2;
  return {row0, col0, row0 + patch_h, col0 + patch_w};
}

PixelRect paste_patch(Tensor& image, const Patch& patch, const PlacementSpec& placement) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeMismatch("image must be [3,H,W], got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  const PixelRect region = placement.resolved_region(h, w, patch.height(), patch.width());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < patch.height(); ++y) {
      for (std::size_t x = 0; x < patch.width(); ++x) {
        image(c, region.row0 + y, region.col0 + x) = patch.at(c, y, x);
      }
    }
  }
  return region;
}

AppliedPatch apply_patch(const Tensor& image, const Patch& patch, const PlacementSpec& placement) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeMismatch("image must be [3,H,W], got " + shape_string(image.shape()));
  }
  for (double v : image.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("image value outside [0,1]: " + std::to_string(v));
  }
  AppliedPatch out{image, {}};
  out.region = paste_patch(out.image, patch, placement);
  return out;
}

Patch clip_patch(const PatchDraft& draft) {
  std::vector<float> values(draft.values.size());
  std::transform(draft.values.begin(), draft.values.end(), values.begin(), [](float v) {
    if (std::isnan(v)) throw DomainError("NaN in patch values before clipping");
    return std::min(1.0f, std::max(0.0f, v));
  });
  return Patch(draft.height, draft.width, std::move(values), draft.meta);
}

Patch clip_patch(const Patch& patch) { return patch; }

Patch random_patch(std::size_t height, std::size_t width, std::uint64_t seed) {
  if (height == 0 || width == 0) throw DomainError("patch extent must be at least 1x1");
  Rng rng(seed);
  std::vector<float> values(3 * height * width);
  for (auto& v : values) v = rng.uniform_float();
  PatchMeta meta;
  meta.source_model = "random";
  meta.seed = seed;
  meta.created_utc = utc_timestamp_now();
  return Patch(height, width, std::move(values), std::move(meta));
}

Patch extract_patch(const Tensor& image, const PixelRect& region, PatchMeta meta) {
  if (image.rank() != 3 || image.dim(0) != 3 || region.row1 > image.dim(1) || region.col1 > image.dim(2) ||
      region.empty()) {
    throw ShapeMismatch("region outside image " + shape_string(image.shape()));
  }
  std::vector<float> values;
  values.reserve(3 * region.area());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = region.row0; y < region.row1; ++y) {
      for (std::size_t x = region.col0; x < region.col1; ++x) values.push_back(static_cast<float>(image(c, y, x)));
    }
  }
  return Patch(region.height(), region.width(), std::move(values), std::move(meta));
}

std::string utc_timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

void write_le_floats(std::ostream& os, std::span<const float> values) {
  static_assert(sizeof(float) == 4);
  for (float v : values) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    const unsigned char bytes[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                    static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    os.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

}  // namespace

void save_patch(const Patch& patch, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const PatchMeta& meta = patch.meta();
  json j = {
      {"format_version", meta.format_version},
      {"shape", {3, patch.height(), patch.width()}},
      {"source_model", meta.source_model},
      {"train_epochs", meta.train_epochs},
      {"step_size", meta.step_size},
      {"seed", meta.seed},
      {"created_utc", meta.created_utc},
  };
  {
    std::ofstream os(dir / "meta.json");
    if (!os) throw IoError("cannot write " + (dir / "meta.json").string());
    os << j.dump(2) << '\n';
  }
  {
    std::ofstream os(dir / "values.bin", std::ios::binary);
    if (!os) throw IoError("cannot write " + (dir / "values.bin").string());
    write_le_floats(os, patch.values());
  }
  Image8 preview{patch.width(), patch.height(), 3, std::vector<std::uint8_t>(3 * patch.height() * patch.width())};
  for (std::size_t y = 0; y < patch.height(); ++y) {
    for (std::size_t x = 0; x < patch.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        preview.pixels[(y * patch.width() + x) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(255.0 * patch.at(c, y, x)));
      }
    }
  }
  write_png(dir / "preview.png", preview);
}

Patch load_patch(const fs::path& dir) {
  std::ifstream ms(dir / "meta.json");
  if (!ms) throw FormatError("missing meta.json in " + dir.string());
  json j;
  try {
    ms >> j;
  } catch (const json::exception& e) {
    throw FormatError("corrupted meta.json in " + dir.string() + ": " + e.what());
  }
  PatchMeta meta;
  std::size_t h = 0;
  std::size_t w = 0;
  try {
    meta.format_version = j.at("format_version").get<int>();
    if (meta.format_version != kPatchFormatVersion) {
      throw FormatError("unsupported patch format_version " + std::to_string(meta.format_version) + " in " +
                        dir.string());
    }
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3 || shape[0] != 3 || shape[1] == 0 || shape[2] == 0) {
      throw FormatError("bad patch shape in " + dir.string());
    }
    h = shape[1];
    w = shape[2];
    meta.source_model = j.at("source_model").get<std::string>();
    meta.train_epochs = j.at("train_epochs").get<int>();
    meta.step_size = j.at("step_size").get<double>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.created_utc = j.at("created_utc").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("malformed meta.json in " + dir.string() + ": " + e.what());
  }

  std::ifstream vs(dir / "values.bin", std::ios::binary);
  if (!vs) throw FormatError("missing values.bin in " + dir.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(vs)), std::istreambuf_iterator<char>());
  if (bytes.size() != 3 * h * w * 4) {
    throw FormatError("values.bin holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(3 * h * w * 4));
  }
  std::vector<float> values(3 * h * w);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = std::uint32_t{bytes[4 * i]} | std::uint32_t{bytes[4 * i + 1]} << 8 |
                               std::uint32_t{bytes[4 * i + 2]} << 16 | std::uint32_t{bytes[4 * i + 3]} << 24;
    values[i] = std::bit_cast<float>(bits);
  }
  try {
    return Patch(h, w, std::move(values), std::move(meta));
  } catch (const DomainError& e) {
    throw FormatError(std::string("corrupted values.bin: ") + e.what());
  }
}

}  // namespace patchforge
