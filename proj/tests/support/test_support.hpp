#ifndef PATCHFORGE_TESTS_SUPPORT_HPP_
#define PATCHFORGE_TESTS_SUPPORT_HPP_

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "patchforge/model_zoo.hpp"
#include "patchforge/rng.hpp"
#include "patchforge/tensor.hpp"

namespace patchforge::testing {

inline Tensor random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Tensor t({3, h, w});
  Rng rng(seed);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

inline LabelMap random_labels(std::size_t h, std::size_t w, int classes, std::uint64_t seed) {
  LabelMap l(h, w);
  Rng rng(seed);
  for (auto& v : l.values) v = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(classes)));
  return l;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "pf") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Per-pixel fake segmenter: logit_k(p) = -|x(p) - centre_k|^2 with fixed
// RGB centres, so predictions depend on the pixel's own colour only.
class NearestColorAdapter final : public ModelAdapter {
 public:
  NearestColorAdapter(std::string name, std::vector<std::array<double, 3>> centres)
      : name_(std::move(name)), centres_(std::move(centres)) {}

  std::string name() const override { return name_; }
  int num_classes() const override { return static_cast<int>(centres_.size()); }
  std::int32_t ignore_index() const override { return 255; }

  Tensor forward(const Tensor& images) const override {
    ++forward_calls;
    const std::size_t b = images.dim(0), h = images.dim(2), w = images.dim(3);
    Tensor out({b, centres_.size(), h, w});
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t k = 0; k < centres_.size(); ++k)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            double d = 0;
            for (std::size_t c = 0; c < 3; ++c) d += std::pow(images(i, c, y, x) - centres_[k][c], 2);
            out(i, k, y, x) = -4.0 * d;
          }
    return out;
  }

  Tensor input_gradient(const Tensor& images, const ScalarLossFn& loss) const override {
    const Tensor logits = forward(images);
    const LossValue lv = loss(logits);
    const std::size_t b = images.dim(0), h = images.dim(2), w = images.dim(3);
    Tensor g(images.shape());
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t k = 0; k < centres_.size(); ++k)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
              g(i, c, y, x) += lv.grad_logits(i, k, y, x) * -8.0 * (images(i, c, y, x) - centres_[k][c]);
    return g;
  }

  void set_inference_mode() override {}
  bool inference_mode() const override { return true; }
  std::uint64_t parameter_checksum() const override { return 42; }

  mutable int forward_calls = 0;

 private:
  std::string name_;
  std::vector<std::array<double, 3>> centres_;
};

}  // namespace patchforge::testing

#endif  // PATCHFORGE_TESTS_SUPPORT_HPP_
