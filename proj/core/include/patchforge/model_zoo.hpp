#ifndef PATCHFORGE_MODEL_ZOO_HPP_
#define PATCHFORGE_MODEL_ZOO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchforge/tensor.hpp"
#include "patchforge/transforms.hpp"

namespace patchforge {

class Dataset;

struct LossValue {
  double value = 0.0;
  Tensor grad_logits;  // d value / d logits, shape [B,C,H,W]
};

// Maps logits [B,C,H,W] to a scalar and its gradient w.r.t. the logits.
using ScalarLossFn = std::function<LossValue(const Tensor& logits)>;

// Contract between the attack and a segmentation network. Inputs are always
// unit RGB [B,3,H,W]; normalisation is the adapter's business. Logits come
// back at input resolution.
class ModelAdapter {
 public:
  virtual ~ModelAdapter() = default;

  virtual std::string name() const = 0;
  virtual int num_classes() const = 0;
  virtual std::int32_t ignore_index() const = 0;

  virtual Tensor forward(const Tensor& images) const = 0;
  // d loss(forward(images)) / d images. Requires inference mode.
  virtual Tensor input_gradient(const Tensor& images, const ScalarLossFn& loss) const = 0;

  virtual void set_inference_mode() = 0;
  virtual bool inference_mode() const = 0;
  virtual std::uint64_t parameter_checksum() const = 0;
};

enum class ToyKind { kTinyCnn, kTinyAttention };

struct ToyModelConfig {
  ToyKind kind = ToyKind::kTinyCnn;
  int num_classes = 6;
  int width = 0;  // 0 picks the per-kind default (8 for the CNN, 32 for attention)
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_string(ToyKind kind);
ToyKind parse_toy_kind(const std::string& name);

class ToyNetwork;

// Desk-scale reference models. Both downsample by 8 internally and pad the
// input up to a multiple of 8, cropping logits and gradients back.
class ToyModel final : public ModelAdapter {
 public:
  explicit ToyModel(const ToyModelConfig& cfg);
  ~ToyModel() override;
  ToyModel(const ToyModel& other);
  ToyModel& operator=(const ToyModel&) = delete;

  std::string name() const override;
  int num_classes() const override { return cfg_.num_classes; }
  std::int32_t ignore_index() const override { return 255; }
  Tensor forward(const Tensor& images) const override;
  Tensor input_gradient(const Tensor& images, const ScalarLossFn& loss) const override;
  void set_inference_mode() override { inference_ = true; }
  void set_training_mode() { inference_ = false; }
  bool inference_mode() const override { return inference_; }
  std::uint64_t parameter_checksum() const override;

  const ToyModelConfig& config() const { return cfg_; }
  std::size_t parameter_count() const;

  // Flattened parameters in a fixed order; gradients use the same order.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  // Value of `loss` and its gradient w.r.t. the flattened parameters.
  double parameter_gradient(const Tensor& images, const ScalarLossFn& loss, std::vector<double>& grad) const;

  // Largest Chebyshev distance (input pixels) at which one input pixel can
  // influence a logit, derived from the layer geometry.
  std::size_t receptive_radius() const;

  void save_weights(const std::filesystem::path& path) const;
  static ToyModel load_weights(const std::filesystem::path& path);

 private:
  ToyModelConfig cfg_;
  std::unique_ptr<ToyNetwork> net_;
  bool inference_ = false;
};

std::unique_ptr<ToyModel> build_toy_model(const ToyModelConfig& cfg);

// Options handed to adapter factories. Extra keys are adapter-specific
// (e.g. weight paths of external models).
struct AdapterOptions {
  int num_classes = 6;
  int width = 0;
  std::uint64_t seed = 0;
  std::filesystem::path weights;
  std::map<std::string, std::string> extra;
};

using AdapterFactory = std::function<std::unique_ptr<ModelAdapter>(const AdapterOptions&)>;

class AdapterRegistry {
 public:
  // Empty registry.
  AdapterRegistry() = default;

  // Registry pre-populated with tiny_cnn and tiny_attention.
  static AdapterRegistry with_builtins();
  static AdapterRegistry& global();

  void register_adapter(const std::string& name, AdapterFactory factory);
  std::unique_ptr<ModelAdapter> get_adapter(const std::string& name, const AdapterOptions& options = {}) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, AdapterFactory> factories_;
};

struct PretrainConfig {
  int epochs = 20;
  double learning_rate = 2e-3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  TransformConfig transform{.scale_min = 0.5, .scale_max = 2.0, .crop_size = 128};
  std::size_t max_val_images = 0;  // 0 = whole split
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

struct PretrainReport {
  std::vector<double> epoch_losses;
  double val_miou = 0.0;
  std::vector<std::optional<double>> val_per_class_iou;
  std::uint64_t checksum = 0;
};

// Per-pixel cross-entropy training with Adam. Leaves the model in inference
// mode and reports val MIoU at native resolution.
PretrainReport pretrain_toy(ToyModel& model, const Dataset& train, const Dataset& val, const PretrainConfig& cfg);

// Helpers shared by evaluation code.
LabelMap predict_labels(const ModelAdapter& adapter, const Tensor& image);
Tensor forward_single(const ModelAdapter& adapter, const Tensor& image);

}  // namespace patchforge

#endif  // PATCHFORGE_MODEL_ZOO_HPP_
