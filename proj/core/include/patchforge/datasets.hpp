#ifndef PATCHFORGE_DATASETS_HPP_
#define PATCHFORGE_DATASETS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "patchforge/tensor.hpp"

namespace patchforge {

struct SampleRecord {
  Tensor image;    // [3,H,W] unit RGB
  LabelMap label;  // class ids or ignore_index
  std::string id;
};

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual SampleRecord get(std::size_t index) const = 0;
  virtual int num_classes() const = 0;
  virtual std::int32_t ignore_index() const = 0;
  virtual std::vector<std::string> class_names() const = 0;
};

// Throws DomainError if the record violates the SampleRecord invariants.
void validate_record(const SampleRecord& record, int num_classes, std::int32_t ignore_index);

enum class ShapeKind { kRectangle, kDisk, kTriangle };

struct SynthShape {
  ShapeKind kind = ShapeKind::kRectangle;
  std::int32_t class_id = 1;
  std::array<double, 3> color{};
  // Rectangle: [x0,x1) x [y0,y1). Disk: centre (cx,cy) radius r.
  // Triangle: vertices (ax,ay) (bx,by) (cx,cy).
  double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;

  bool covers(double x, double y) const;
};

struct SynthScene {
  std::array<double, 3> background_top{};
  std::array<double, 3> background_bottom{};
  double gradient_angle = 0.0;
  std::array<double, 3> illuminant{1.0, 1.0, 1.0};  // per-channel gain applied to the whole scene
  std::vector<SynthShape> shapes;  // painted in order, later shapes on top
  std::uint64_t noise_seed = 0;
};

struct SynthShapesParams {
  std::size_t n_images = 200;
  std::size_t height = 128;
  std::size_t width = 256;
  int num_classes = 6;
  std::uint64_t seed = 0;
  double noise_sigma = 0.03;
  // Per-scene channel gains are drawn from [1-j, 1+j].
  double illumination_jitter = 0.5;
};

// Background gradient (class 0) plus 3-6 opaque shapes. Class k >= 1 maps to
// a fixed (shape kind, colour) pair.
class SynthShapesDataset final : public Dataset {
 public:
  explicit SynthShapesDataset(SynthShapesParams params);

  std::size_t size() const override { return params_.n_images; }
  SampleRecord get(std::size_t index) const override;
  int num_classes() const override { return params_.num_classes; }
  std::int32_t ignore_index() const override { return 255; }
  std::vector<std::string> class_names() const override;

  const SynthShapesParams& params() const { return params_; }
  SynthScene scene(std::size_t index) const;
  // Rasterizes a scene's label mask without rendering colours.
  LabelMap render_label(const SynthScene& scene) const;
  void enable_cache();

  static ShapeKind kind_for_class(std::int32_t class_id);
  static std::array<double, 3> color_for_class(std::int32_t class_id);

 private:
  SynthShapesParams params_;
  std::unique_ptr<std::mutex> cache_mutex_ = std::make_unique<std::mutex>();
  mutable std::vector<std::optional<SampleRecord>> cache_;
  bool cache_enabled_ = false;
};

SynthShapesDataset synth_shapes(std::size_t n_images, std::size_t height, std::size_t width, int num_classes,
                                std::uint64_t seed);

class CityscapesLayoutDataset final : public Dataset {
 public:
  // `cache_dir`, when set, holds decoded samples keyed by id.
  CityscapesLayoutDataset(std::filesystem::path root, std::string split,
                          std::optional<std::filesystem::path> cache_dir = std::nullopt);

  std::size_t size() const override { return entries_.size(); }
  SampleRecord get(std::size_t index) const override;
  int num_classes() const override { return 19; }
  std::int32_t ignore_index() const override { return 255; }
  std::vector<std::string> class_names() const override;

  const std::string& id(std::size_t index) const { return entries_.at(index).id; }

 private:
  struct Entry {
    std::string id;
    std::filesystem::path image;
    std::filesystem::path label;
  };
  std::filesystem::path root_;
  std::string split_;
  std::optional<std::filesystem::path> cache_dir_;
  std::vector<Entry> entries_;
};

std::unique_ptr<CityscapesLayoutDataset> load_cityscapes_layout(
    const std::filesystem::path& root, const std::string& split,
    std::optional<std::filesystem::path> cache_dir = std::nullopt);

// Writes a dataset as leftImg8bit/<split>/<city>/ + gtFine/<split>/<city>/.
void materialize_cityscapes_layout(const Dataset& dataset, const std::filesystem::path& root,
                                   const std::string& split, const std::string& city = "synth");

enum class DatasetKind { kCityscapesLayout, kSynthShapes };
enum class Split { kTrain, kVal };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSynthShapes;
  std::filesystem::path root;
  Split split = Split::kTrain;
  SynthShapesParams synth;  // n_images is overridden per split
  std::size_t n_train = 200;
  std::size_t n_val = 40;
  std::optional<std::filesystem::path> cache_dir;
};

std::string to_string(Split split);
std::unique_ptr<Dataset> open_dataset(const DatasetSpec& spec);

// Per-epoch shuffle keyed by (seed, epoch); the last batch may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch);

// Seeded permutation of [0,n), first `count` entries (all when count >= n).
std::vector<std::size_t> seeded_subset(std::size_t n, std::size_t count, std::uint64_t seed);

class BatchStream {
 public:
  BatchStream(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch);
  bool next(std::vector<SampleRecord>& batch);
  std::size_t num_batches() const { return batches_.size(); }

 private:
  const Dataset& dataset_;
  std::vector<std::vector<std::size_t>> batches_;
  std::size_t cursor_ = 0;
};

}  // namespace patchforge

#endif  // PATCHFORGE_DATASETS_HPP_
