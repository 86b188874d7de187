#include <cmath>
#include <string>

#include "patchforge/datasets.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/metrics.hpp"
#include "patchforge/model_zoo.hpp"
#include "patchforge/transforms.hpp"

namespace patchforge {

namespace {

// Mean cross-entropy over every labeled pixel of the batch.
LossValue pixel_cross_entropy(const Tensor& logits, std::span<const LabelMap> labels, std::int32_t ignore) {
  const std::size_t batch = logits.dim(0), classes = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  LossValue out{0.0, Tensor(logits.shape())};
  std::size_t count = 0;
  for (const LabelMap& l : labels) {
    for (std::int32_t v : l.values) count += v != ignore;
  }
  if (count == 0) return out;
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<double> p(classes);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::int32_t t = labels[b].at(y, x);
        if (t == ignore) continue;
        double mx = logits(b, 0, y, x);
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits(b, c, y, x));
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
          p[c] = std::exp(logits(b, c, y, x) - mx);
          z += p[c];
        }
        out.value += (std::log(z) + mx - logits(b, static_cast<std::size_t>(t), y, x)) * inv;
        for (std::size_t c = 0; c < classes; ++c) {
          out.grad_logits(b, c, y, x) = (p[c] / z - (static_cast<std::int32_t>(c) == t ? 1.0 : 0.0)) * inv;
        }
      }
    }
  }
  return out;
}

struct Adam {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  long step = 0;

  void update(std::vector<double>& params, const std::vector<double>& grad) {
    if (m.empty()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

}  // namespace

PretrainReport pretrain_toy(ToyModel& model, const Dataset& train, const Dataset& val, const PretrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("pretrain epochs must be >= 0");
  if (cfg.batch_size == 0) throw ConfigError("pretrain batch size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("pretrain learning rate must be > 0");
  cfg.transform.validate();
  if (train.size() == 0) throw EmptyDataset("pretraining needs a non-empty train split");
  if (val.size() == 0) throw EmptyDataset("pretraining needs a non-empty val split");
  if (train.num_classes() != model.num_classes()) throw ConfigError("dataset and model disagree on class count");

  PretrainReport report;
  model.set_training_mode();
  Adam adam{cfg.learning_rate};
  std::vector<double> params = model.parameters();
  std::vector<double> grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 0x707265ULL + static_cast<std::uint64_t>(epoch)));
    BatchStream stream(train, cfg.batch_size, cfg.seed, static_cast<std::uint64_t>(epoch));
    std::vector<SampleRecord> batch;
    double loss_sum = 0.0;
    std::size_t steps = 0;
    while (stream.next(batch)) {
      std::vector<Tensor> images;
      std::vector<LabelMap> labels;
      for (const SampleRecord& rec : batch) {
        const TransformSpec t = sample_transform(rng, cfg.transform, rec.image.dim(1), rec.image.dim(2));
        TransformedSample s = apply_transform(rec.image, rec.label, t, cfg.transform);
        images.push_back(std::move(s.image));
        labels.push_back(std::move(s.label));
      }
      const Tensor x = Tensor::stack(images);
      const std::int32_t ignore = model.ignore_index();
      const double loss = model.parameter_gradient(
          x, [&](const Tensor& logits) { return pixel_cross_entropy(logits, labels, ignore); }, grad);
      bool finite = std::isfinite(loss);
      for (double g : grad) finite = finite && std::isfinite(g);
      if (!finite) {
        throw DivergenceError("pretraining diverged at epoch " + std::to_string(epoch + 1));
      }
      adam.update(params, grad);
      model.set_parameters(params);
      loss_sum += loss;
      ++steps;
    }
    report.epoch_losses.push_back(steps ? loss_sum / static_cast<double>(steps) : 0.0);
    if (cfg.on_epoch) cfg.on_epoch(epoch + 1, report.epoch_losses.back());
  }

  model.set_inference_mode();
  ConfusionMatrix cm(model.num_classes());
  const std::size_t n_val = cfg.max_val_images ? std::min(cfg.max_val_images, val.size()) : val.size();
  for (std::size_t i = 0; i < n_val; ++i) {
    const SampleRecord rec = val.get(i);
    update_confusion(cm, predict_labels(model, rec.image), rec.label, std::nullopt, val.ignore_index());
  }
  report.val_miou = miou(cm);
  report.val_per_class_iou = iou_per_class(cm);
  report.checksum = model.parameter_checksum();
  return report;
}

}  // namespace patchforge
