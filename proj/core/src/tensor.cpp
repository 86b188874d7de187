#include "patchforge/tensor.hpp"

#include <functional>
#include <numeric>
#include <sstream>

#include "patchforge/errors.hpp"

namespace patchforge {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeMismatch("tensor of shape " + shape_string(shape_) + " cannot hold " +
                        std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::slice(std::size_t index) const {
  if (shape_.empty() || index >= shape_[0]) {
    throw ShapeMismatch("slice index out of range for shape " + shape_string(shape_));
  }
  std::vector<std::size_t> inner(shape_.begin() + 1, shape_.end());
  const std::size_t stride = element_count(inner);
  std::vector<double> values(data_.begin() + static_cast<std::ptrdiff_t>(index * stride),
                             data_.begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
  return Tensor(std::move(inner), std::move(values));
}

void Tensor::set_slice(std::size_t index, const Tensor& value) {
  if (shape_.empty() || index >= shape_[0] ||
      !std::equal(shape_.begin() + 1, shape_.end(), value.shape_.begin(), value.shape_.end())) {
    throw ShapeMismatch("cannot assign " + shape_string(value.shape_) + " into slice of " + shape_string(shape_));
  }
  std::copy(value.data_.begin(), value.data_.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(index * value.size()));
}

Tensor Tensor::stack(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeMismatch("cannot stack zero tensors");
  std::vector<std::size_t> shape{items.size()};
  shape.insert(shape.end(), items[0].shape_.begin(), items[0].shape_.end());
  Tensor out(shape);
  for (std::size_t i = 0; i < items.size(); ++i) out.set_slice(i, items[i]);
  return out;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace patchforge
