#include "patchforge/trainer.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "patchforge/adv_loss.hpp"
#include "patchforge/datasets.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/evalsuite.hpp"
#include "patchforge/model_zoo.hpp"

namespace patchforge {

namespace {

constexpr std::uint64_t kInitKey = 0x696e6974;       // "init"
constexpr std::uint64_t kTransformKey = 0x656f74;    // "eot"
constexpr std::uint64_t kEvalSubsetKey = 0x6465636179;  // "decay"

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void TrainConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("step_size must be a positive number");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (patch_size == 0) throw ConfigError("patch_size must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  transform.validate();
  if (patch_size > transform.crop_size) {
    throw PatchTooLarge("patch of side " + std::to_string(patch_size) + " does not fit crop " +
                        std::to_string(transform.crop_size));
  }
}

Patch ascent_step(const Patch& patch, const Tensor& grad, double step_size) {
  if (grad.size() != patch.size()) {
    throw ShapeMismatch("patch gradient has " + std::to_string(grad.size()) + " values, patch has " +
                        std::to_string(patch.size()));
  }
  PatchDraft draft{patch.height(), patch.width(), std::vector<float>(patch.size()), patch.meta()};
  const auto values = patch.values();
  for (std::size_t i = 0; i < patch.size(); ++i) {
    if (!std::isfinite(grad[i])) throw NonFiniteGradient("non-finite patch gradient at index " + std::to_string(i));
    draft.values[i] = static_cast<float>(static_cast<double>(values[i]) + step_size * sign(grad[i]));
  }
  return clip_patch(draft);
}

Patch init_patch(const TrainConfig& cfg, std::uint64_t seed) {
  return random_patch(cfg.patch_size, cfg.patch_size, mix_seed(seed, kInitKey));
}

TrainResult train_patch(const ModelAdapter& adapter, const Dataset& train, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
  cfg.validate();
  if (!adapter.inference_mode()) throw StateError("the attacked model must be in inference mode");
  if (train.size() == 0) throw EmptyDataset("patch training needs a non-empty dataset");

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&start] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  const PlacementSpec placement;
  const std::vector<std::size_t> eval_indices = seeded_subset(train.size(), cfg.eval_subset,
                                                              mix_seed(cfg.seed, kEvalSubsetKey));
  const std::int32_t ignore = adapter.ignore_index();

  Patch patch = init_patch(cfg, cfg.seed);
  PatchMeta meta{.source_model = adapter.name(), .train_epochs = 0, .step_size = cfg.step_size, .seed = cfg.seed};
  patch.set_meta(meta);

  TrainResult result{patch, {}};
  result.history.model = adapter.name();
  result.history.class_names = train.class_names();
  auto record_epoch = [&](int epoch, std::optional<double> mean_loss) {
    EpochRecord rec{.epoch = epoch, .mean_loss = mean_loss};
    const bool last = epoch == cfg.epochs;
    if (epoch % cfg.eval_every == 0 || last) {
      const DecayPoint p = evaluate_subset(adapter, patch, train, eval_indices, epoch);
      rec.eval_miou = p.miou;
      rec.per_class_iou = p.per_class_iou;
    }
    rec.wall_time_s = elapsed();
    result.history.records.push_back(std::move(rec));
    if (hooks.on_epoch) hooks.on_epoch(result.history.records.back(), patch);
  };

  record_epoch(0, std::nullopt);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, kTransformKey + static_cast<std::uint64_t>(epoch)));
    BatchStream stream(train, cfg.batch_size, cfg.seed, static_cast<std::uint64_t>(epoch));
    std::vector<SampleRecord> batch;
    double loss_sum = 0.0;
    std::size_t steps = 0;
    while (stream.next(batch)) {
      std::vector<Tensor> images;
      std::vector<LabelMap> labels;
      std::vector<std::optional<PixelRect>> regions;
      for (const SampleRecord& rec : batch) {
        const TransformSpec t = sample_transform(rng, cfg.transform, rec.image.dim(1), rec.image.dim(2));
        TransformedSample s = apply_transform(rec.image, rec.label, t, cfg.transform);
        regions.emplace_back(paste_patch(s.image, patch, placement));
        images.push_back(std::move(s.image));
        labels.push_back(std::move(s.label));
      }
      const Tensor x = Tensor::stack(images);
      double loss_value = 0.0;
      const Tensor gx = adapter.input_gradient(x, [&](const Tensor& logits) {
        BatchLoss bl = adversarial_batch_loss(logits, labels, regions, ignore);
        loss_value = bl.value;
        return LossValue{bl.value, std::move(bl.grad_logits)};
      });
      if (!std::isfinite(loss_value)) {
        throw NonFiniteLoss("non-finite attack loss at epoch " + std::to_string(epoch));
      }

      // Sum of per-image patch-region gradients.
      Tensor g({3, patch.height(), patch.width()});
      for (std::size_t b = 0; b < images.size(); ++b) {
        const PixelRect& r = *regions[b];
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t y = 0; y < r.height(); ++y) {
            for (std::size_t xx = 0; xx < r.width(); ++xx) g(c, y, xx) += gx(b, c, r.row0 + y, r.col0 + xx);
          }
        }
      }
      Patch next = ascent_step(patch, g, cfg.step_size);
      if (hooks.check_invariants) {
        for (float v : next.values()) {
          if (!(v >= 0.0f && v <= 1.0f)) throw DomainError("patch left [0,1] after a step");
        }
      }
      if (hooks.on_step) hooks.on_step(StepEvent{epoch, steps, loss_value, patch, next});
      patch = std::move(next);
      loss_sum += loss_value;
      ++steps;
    }
    meta.train_epochs = epoch;
    patch.set_meta(meta);
    record_epoch(epoch, steps ? loss_sum / static_cast<double>(steps) : 0.0);
  }
  meta.created_utc = utc_timestamp_now();
  patch.set_meta(meta);
  result.patch = patch;
  return result;
}

}  // namespace patchforge
