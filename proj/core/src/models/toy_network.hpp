#ifndef PATCHFORGE_MODELS_TOY_NETWORK_HPP_
#define PATCHFORGE_MODELS_TOY_NETWORK_HPP_

#include <cstddef>
#include <functional>
#include <memory>

#include "nn/layers.hpp"
#include "patchforge/model_zoo.hpp"

namespace patchforge {

// Network body behind ToyModel. Inputs are normalised feature maps whose
// extents are multiples of kStride; outputs are logits at input resolution.
class ToyNetwork {
 public:
  static constexpr int kStride = 8;

  struct Cache {
    virtual ~Cache() = default;
  };

  virtual ~ToyNetwork() = default;
  virtual std::unique_ptr<ToyNetwork> clone() const = 0;
  // Same architecture, all parameters zero; used as a gradient accumulator.
  virtual std::unique_ptr<ToyNetwork> zeros_like() const = 0;

  virtual nn::FeatureMap forward(const nn::FeatureMap& x, std::unique_ptr<Cache>* cache) const = 0;
  // `grads` (nullable) must come from zeros_like(). Input gradient is only
  // computed when need_input_grad is set.
  virtual nn::FeatureMap backward(const Cache& cache, const nn::FeatureMap& dlogits, ToyNetwork* grads,
                                  bool need_input_grad) const = 0;

  virtual void visit(const std::function<void(nn::Matrix&)>& fn) = 0;
  void visit(const std::function<void(const nn::Matrix&)>& fn) const {
    const_cast<ToyNetwork*>(this)->visit([&fn](nn::Matrix& m) { fn(m); });
  }

  // Max Chebyshev reach of one input pixel, measured on an extent x extent
  // input. SIZE_MAX for global (attention) models.
  virtual std::size_t receptive_radius(int extent) const = 0;
};

std::unique_ptr<ToyNetwork> make_tiny_cnn(int num_classes, int width, Rng& rng);
std::unique_ptr<ToyNetwork> make_tiny_attention(int num_classes, int width, Rng& rng);

}  // namespace patchforge

#endif  // PATCHFORGE_MODELS_TOY_NETWORK_HPP_
