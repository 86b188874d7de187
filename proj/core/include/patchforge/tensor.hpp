#ifndef PATCHFORGE_TENSOR_HPP_
#define PATCHFORGE_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace patchforge {

// Dense row-major tensor of doubles. Images are [3,H,W], batches [B,3,H,W],
// logits [C,H,W] or [B,C,H,W].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double& operator()(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double operator()(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  // Copy of the leading-axis slice `index` (rank drops by one).
  Tensor slice(std::size_t index) const;
  void set_slice(std::size_t index, const Tensor& value);

  // Stacks equally shaped tensors along a new leading axis.
  static Tensor stack(std::span<const Tensor> items);

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Integer class mask [H,W].
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> values;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0)
      : height(h), width(w), values(h * w, fill) {}

  std::int32_t& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  std::int32_t at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  std::size_t size() const { return values.size(); }

  bool operator==(const LabelMap& other) const = default;
};

// Half-open pixel rectangle [row0,row1) x [col0,col1).
struct PixelRect {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  std::size_t row1 = 0;
  std::size_t col1 = 0;

  bool contains(std::size_t r, std::size_t c) const {
    return r >= row0 && r < row1 && c >= col0 && c < col1;
  }
  std::size_t height() const { return row1 - row0; }
  std::size_t width() const { return col1 - col0; }
  std::size_t area() const { return height() * width(); }
  bool empty() const { return row1 <= row0 || col1 <= col0; }

  bool operator==(const PixelRect& other) const = default;
};

}  // namespace patchforge

#endif  // PATCHFORGE_TENSOR_HPP_
