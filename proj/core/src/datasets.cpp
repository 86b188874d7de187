#include "patchforge/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "patchforge/errors.hpp"
#include "patchforge/image_io.hpp"
#include "patchforge/rng.hpp"

namespace patchforge {

namespace fs = std::filesystem;

void validate_record(const SampleRecord& record, int num_classes, std::int32_t ignore_index) {
  const Tensor& img = record.image;
  if (img.rank() != 3 || img.dim(0) != 3) throw DomainError(record.id + ": image must be [3,H,W]");
  if (record.label.height != img.dim(1) || record.label.width != img.dim(2)) {
    throw DomainError(record.id + ": label/image size mismatch");
  }
  for (double v : img.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError(record.id + ": image value outside [0,1]");
  }
  for (auto v : record.label.values) {
    if (v != ignore_index && (v < 0 || v >= num_classes)) {
      throw DomainError(record.id + ": label value " + std::to_string(v) + " out of range");
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic shapes

bool SynthShape::covers(double x, double y) const {
  switch (kind) {
    case ShapeKind::kRectangle:
      return x >= a && x < b && y >= c && y < d;
    case ShapeKind::kDisk: {
      const double dx = x - a;
      const double dy = y - b;
      return dx * dx + dy * dy <= c * c;
    }
    case ShapeKind::kTriangle: {
      // Same-sign test on the three edge functions.
      auto edge = [](double px, double py, double qx, double qy, double x0, double y0) {
        return (qx - px) * (y0 - py) - (qy - py) * (x0 - px);
      };
      const double e0 = edge(a, b, c, d, x, y);
      const double e1 = edge(c, d, e, f, x, y);
      const double e2 = edge(e, f, a, b, x, y);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
  }
  return false;
}

namespace {

constexpr std::array<std::array<double, 3>, 8> kPalette{{
    {0.86, 0.18, 0.16},  // red
    {0.18, 0.30, 0.88},  // blue
    {0.20, 0.76, 0.26},  // green
    {0.92, 0.82, 0.18},  // yellow
    {0.80, 0.24, 0.80},  // magenta
    {0.18, 0.80, 0.82},  // cyan
    {0.95, 0.52, 0.10},  // orange
    {0.52, 0.30, 0.78},  // purple
}};
constexpr std::array<const char*, 8> kPaletteNames{"red", "blue", "green", "yellow", "magenta", "cyan", "orange",
                                                   "purple"};
constexpr std::array<const char*, 3> kKindNames{"rectangle", "disk", "triangle"};

}  // namespace

ShapeKind SynthShapesDataset::kind_for_class(std::int32_t class_id) {
  return static_cast<ShapeKind>((class_id - 1) % 3);
}

std::array<double, 3> SynthShapesDataset::color_for_class(std::int32_t class_id) {
  return kPalette[static_cast<std::size_t>(class_id - 1) % kPalette.size()];
}

SynthShapesDataset::SynthShapesDataset(SynthShapesParams params) : params_(params) {
  if (params_.num_classes < 2) throw ConfigError("synth_shapes needs num_classes >= 2");
  if (params_.num_classes > 255) throw ConfigError("synth_shapes supports at most 255 classes");
  if (params_.n_images < 1) throw ConfigError("synth_shapes needs at least one image");
  if (params_.height < 4 || params_.width < 4) throw ConfigError("synth_shapes images must be at least 4x4");
  if (!(params_.illumination_jitter >= 0.0 && params_.illumination_jitter < 1.0)) {
    throw ConfigError("synth_shapes illumination_jitter must be in [0,1)");
  }
  if (!(params_.noise_sigma >= 0.0)) throw ConfigError("synth_shapes noise_sigma must be >= 0");
}

std::vector<std::string> SynthShapesDataset::class_names() const {
  std::vector<std::string> names{"background"};
  for (int k = 1; k < params_.num_classes; ++k) {
    names.push_back(std::string(kPaletteNames[static_cast<std::size_t>(k - 1) % kPalette.size()]) + "_" +
                    kKindNames[static_cast<std::size_t>((k - 1) % 3)]);
  }
  return names;
}

SynthScene SynthShapesDataset::scene(std::size_t index) const {
  Rng rng(mix_seed(params_.seed, index));
  const double H = static_cast<double>(params_.height);
  const double W = static_cast<double>(params_.width);
  const double s = std::min(H, W) / 128.0;

  SynthScene scene;
  auto muted = [&rng] {
    const double gray = rng.uniform(0.25, 0.65);
    std::array<double, 3> c{};
    for (auto& v : c) v = std::clamp(gray + rng.uniform(-0.02, 0.02), 0.0, 1.0);
    return c;
  };
  scene.background_top = muted();
  scene.background_bottom = muted();
  scene.gradient_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ij = params_.illumination_jitter;
  for (auto& g : scene.illuminant) g = rng.uniform(1.0 - ij, 1.0 + ij);

  const auto n_shapes = rng.between(3, 6);
  for (std::int64_t k = 0; k < n_shapes; ++k) {
    SynthShape shape;
    shape.class_id = static_cast<std::int32_t>(rng.between(1, params_.num_classes - 1));
    shape.kind = kind_for_class(shape.class_id);
    shape.color = color_for_class(shape.class_id);
    for (auto& v : shape.color) v = std::clamp(v + rng.uniform(-0.06, 0.06), 0.0, 1.0);
    switch (shape.kind) {
      case ShapeKind::kRectangle: {
        const double w = std::max(2.0, rng.uniform(14.0, 48.0) * s);
        const double h = std::max(2.0, rng.uniform(14.0, 48.0) * s);
        const double x0 = rng.uniform(0.0, std::max(0.0, W - w));
        const double y0 = rng.uniform(0.0, std::max(0.0, H - h));
        shape.a = x0;
        shape.b = x0 + w;
        shape.c = y0;
        shape.d = y0 + h;
        break;
      }
      case ShapeKind::kDisk: {
        const double r = std::max(1.5, rng.uniform(8.0, 24.0) * s);
        shape.a = rng.uniform(std::min(r, W / 2), std::max(W - r, W / 2));
        shape.b = rng.uniform(std::min(r, H / 2), std::max(H - r, H / 2));
        shape.c = r;
        break;
      }
      case ShapeKind::kTriangle: {
        const double radius = std::max(2.0, rng.uniform(12.0, 30.0) * s);
        const double cx = rng.uniform(std::min(radius, W / 2), std::max(W - radius, W / 2));
        const double cy = rng.uniform(std::min(radius, H / 2), std::max(H - radius, H / 2));
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        std::array<double, 6> v{};
        for (int j = 0; j < 3; ++j) {
          const double ang = theta + j * 2.0 * std::numbers::pi / 3.0 + rng.uniform(-0.3, 0.3);
          const double rr = radius * rng.uniform(0.8, 1.2);
          v[2 * j] = cx + rr * std::cos(ang);
          v[2 * j + 1] = cy + rr * std::sin(ang);
        }
        shape.a = v[0];
        shape.b = v[1];
        shape.c = v[2];
        shape.d = v[3];
        shape.e = v[4];
        shape.f = v[5];
        break;
      }
    }
    scene.shapes.push_back(shape);
  }
  scene.noise_seed = rng.next_u64();
  return scene;
}

LabelMap SynthShapesDataset::render_label(const SynthScene& scene) const {
  LabelMap label(params_.height, params_.width, 0);
  for (std::size_t y = 0; y < params_.height; ++y) {
    for (std::size_t x = 0; x < params_.width; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double py = static_cast<double>(y) + 0.5;
      for (const auto& shape : scene.shapes) {
        if (shape.covers(px, py)) label.at(y, x) = shape.class_id;
      }
    }
  }
  return label;
}

SampleRecord SynthShapesDataset::get(std::size_t index) const {
  if (index >= params_.n_images) throw std::out_of_range("synth_shapes index out of range");
  if (cache_enabled_) {
    std::lock_guard lock(*cache_mutex_);
    if (cache_[index]) return *cache_[index];
  }
  const SynthScene sc = scene(index);
  const std::size_t H = params_.height;
  const std::size_t W = params_.width;
  SampleRecord rec{Tensor({3, H, W}), LabelMap(H, W, 0), "synth_" + std::to_string(index)};
  const double ca = std::cos(sc.gradient_angle);
  const double sa = std::sin(sc.gradient_angle);
  Rng noise(sc.noise_seed);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double py = static_cast<double>(y) + 0.5;
      const double t = std::clamp((px / W - 0.5) * ca + (py / H - 0.5) * sa + 0.5, 0.0, 1.0);
      std::array<double, 3> color{};
      for (std::size_t c = 0; c < 3; ++c) color[c] = sc.background_top[c] * (1.0 - t) + sc.background_bottom[c] * t;
      std::int32_t cls = 0;
      for (const auto& shape : sc.shapes) {
        if (shape.covers(px, py)) {
          color = shape.color;
          cls = shape.class_id;
        }
      }
      rec.label.at(y, x) = cls;
      for (std::size_t c = 0; c < 3; ++c) {
        rec.image(c, y, x) = std::clamp(color[c] * sc.illuminant[c] + params_.noise_sigma * noise.normal(), 0.0, 1.0);
      }
    }
  }
  if (cache_enabled_) {
    std::lock_guard lock(*cache_mutex_);
    cache_[index] = rec;
  }
  return rec;
}

void SynthShapesDataset::enable_cache() {
  std::lock_guard lock(*cache_mutex_);
  cache_enabled_ = true;
  cache_.assign(params_.n_images, std::nullopt);
}

SynthShapesDataset synth_shapes(std::size_t n_images, std::size_t height, std::size_t width, int num_classes,
                                std::uint64_t seed) {
  SynthShapesParams p;
  p.n_images = n_images;
  p.height = height;
  p.width = width;
  p.num_classes = num_classes;
  p.seed = seed;
  return SynthShapesDataset(p);
}

// ---------------------------------------------------------------------------
// Cityscapes layout

namespace {

constexpr std::string_view kImageSuffix = "_leftImg8bit.png";
constexpr std::string_view kLabelSuffix = "_gtFine_labelTrainIds.png";

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct DecodedCacheHeader {
  std::uint32_t magic = 0x50464443;  // "PFDC"
  std::uint32_t height = 0;
  std::uint32_t width = 0;
};

}  // namespace

CityscapesLayoutDataset::CityscapesLayoutDataset(fs::path root, std::string split,
                                                 std::optional<fs::path> cache_dir)
    : root_(std::move(root)), split_(std::move(split)), cache_dir_(std::move(cache_dir)) {
  const fs::path image_root = root_ / "leftImg8bit" / split_;
  const fs::path label_root = root_ / "gtFine" / split_;
  if (!fs::is_directory(image_root)) throw LayoutError("missing directory " + image_root.string());
  for (const auto& city : fs::directory_iterator(image_root)) {
    if (!city.is_directory()) continue;
    for (const auto& file : fs::directory_iterator(city.path())) {
      const std::string fname = file.path().filename().string();
      if (!file.is_regular_file() || !ends_with(fname, kImageSuffix)) continue;
      const std::string stem = fname.substr(0, fname.size() - kImageSuffix.size());
      const std::string cityname = city.path().filename().string();
      Entry e{stem, file.path(), label_root / cityname / (stem + std::string(kLabelSuffix))};
      if (!fs::is_regular_file(e.label)) {
        throw MissingPair("no labelTrainIds mask for " + stem + " (expected " + e.label.string() + ")");
      }
      entries_.push_back(std::move(e));
    }
  }
  if (entries_.empty()) throw LayoutError("no *_leftImg8bit.png under " + image_root.string());
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.id < b.id; });
}

std::vector<std::string> CityscapesLayoutDataset::class_names() const {
  return {"road",  "sidewalk", "building", "wall",    "fence",   "pole",  "traffic light",
          "traffic sign", "vegetation", "terrain", "sky", "person", "rider", "car",
          "truck", "bus",      "train",    "motorcycle", "bicycle"};
}

SampleRecord CityscapesLayoutDataset::get(std::size_t index) const {
  const Entry& e = entries_.at(index);
  fs::path cache_file;
  if (cache_dir_) {
    cache_file = *cache_dir_ / split_ / (e.id + ".pfdc");
    std::ifstream is(cache_file, std::ios::binary);
    DecodedCacheHeader hdr;
    if (is && is.read(reinterpret_cast<char*>(&hdr), sizeof(hdr)) && hdr.magic == DecodedCacheHeader{}.magic) {
      Image8 rgb{hdr.width, hdr.height, 3, std::vector<std::uint8_t>(3ull * hdr.width * hdr.height)};
      Image8 lab{hdr.width, hdr.height, 1, std::vector<std::uint8_t>(1ull * hdr.width * hdr.height)};
      is.read(reinterpret_cast<char*>(rgb.pixels.data()), static_cast<std::streamsize>(rgb.pixels.size()));
      is.read(reinterpret_cast<char*>(lab.pixels.data()), static_cast<std::streamsize>(lab.pixels.size()));
      if (is) return {from_image8(rgb), label_from_image8(lab), e.id};
    }
  }

  const Image8 rgb = read_png(e.image);
  const Image8 lab = read_png(e.label);
  if (rgb.width != lab.width || rgb.height != lab.height) {
    throw LayoutError(e.id + ": image and label dimensions differ");
  }
  if (lab.channels != 1) throw LayoutError(e.id + ": labelTrainIds mask must be single-channel");
  for (auto v : lab.pixels) {
    if (v >= 19 && v != 255) {
      throw LayoutError(e.id + ": label value " + std::to_string(v) + " is not a train id (raw labelIds?)");
    }
  }
  if (cache_dir_) {
    std::error_code ec;
    fs::create_directories(cache_file.parent_path(), ec);
    std::ofstream os(cache_file, std::ios::binary);
    if (os) {
      const DecodedCacheHeader hdr{0x50464443, static_cast<std::uint32_t>(rgb.height),
                                   static_cast<std::uint32_t>(rgb.width)};
      Image8 rgb3 = rgb.channels == 3 ? rgb : to_image8(from_image8(rgb));
      os.write(reinterpret_cast<const char*>(&hdr), sizeof(hdr));
      os.write(reinterpret_cast<const char*>(rgb3.pixels.data()), static_cast<std::streamsize>(rgb3.pixels.size()));
      os.write(reinterpret_cast<const char*>(lab.pixels.data()), static_cast<std::streamsize>(lab.pixels.size()));
    }
  }
  return {from_image8(rgb), label_from_image8(lab), e.id};
}

std::unique_ptr<CityscapesLayoutDataset> load_cityscapes_layout(const fs::path& root, const std::string& split,
                                                                std::optional<fs::path> cache_dir) {
  return std::make_unique<CityscapesLayoutDataset>(root, split, std::move(cache_dir));
}

void materialize_cityscapes_layout(const Dataset& dataset, const fs::path& root, const std::string& split,
                                   const std::string& city) {
  const fs::path image_dir = root / "leftImg8bit" / split / city;
  const fs::path label_dir = root / "gtFine" / split / city;
  fs::create_directories(image_dir);
  fs::create_directories(label_dir);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const SampleRecord rec = dataset.get(i);
    write_png(image_dir / (rec.id + std::string(kImageSuffix)), to_image8(rec.image));
    write_png(label_dir / (rec.id + std::string(kLabelSuffix)), label_to_image8(rec.label));
  }
}

// ---------------------------------------------------------------------------

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "val"; }

std::unique_ptr<Dataset> open_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetKind::kCityscapesLayout) {
    return load_cityscapes_layout(spec.root, to_string(spec.split), spec.cache_dir);
  }
  SynthShapesParams p = spec.synth;
  p.n_images = spec.split == Split::kTrain ? spec.n_train : spec.n_val;
  // Splits draw from disjoint seed streams.
  p.seed = mix_seed(spec.synth.seed, spec.split == Split::kTrain ? 0x7472u : 0x76616cu);
  auto ds = std::make_unique<SynthShapesDataset>(p);
  ds->enable_cache();
  return ds;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  }
  return out;
}

std::vector<std::size_t> seeded_subset(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (count == 0 || count >= n) return order;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

BatchStream::BatchStream(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch)
    : dataset_(dataset), batches_(batch_indices(dataset.size(), batch_size, seed, epoch)) {}

bool BatchStream::next(std::vector<SampleRecord>& batch) {
  if (cursor_ >= batches_.size()) return false;
  batch.clear();
  for (std::size_t i : batches_[cursor_]) batch.push_back(dataset_.get(i));
  ++cursor_;
  return true;
}

}  // namespace patchforge
