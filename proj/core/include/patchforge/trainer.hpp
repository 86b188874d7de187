#ifndef PATCHFORGE_TRAINER_HPP_
#define PATCHFORGE_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "patchforge/patch.hpp"
#include "patchforge/tensor.hpp"
#include "patchforge/transforms.hpp"

namespace patchforge {

class Dataset;
class ModelAdapter;

struct TrainConfig {
  double step_size = 0.005;
  int epochs = 30;
  std::size_t batch_size = 6;
  std::size_t patch_size = 200;
  TransformConfig transform;
  std::uint64_t seed = 0;
  int eval_every = 1;
  std::size_t eval_subset = 100;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  std::optional<double> mean_loss;  // empty for the epoch-0 (initial patch) record
  std::optional<double> eval_miou;
  std::vector<std::optional<double>> per_class_iou;
  double wall_time_s = 0.0;
};

struct TrainHistory {
  std::string model;
  std::vector<std::string> class_names;
  std::vector<EpochRecord> records;
};

struct StepEvent {
  int epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  const Patch& before;
  const Patch& after;
};

struct TrainHooks {
  std::function<void(const StepEvent&)> on_step;
  // Called at the end of every epoch (epoch 0 = initial patch).
  std::function<void(const EpochRecord&, const Patch&)> on_epoch;
  // Debug mode re-checks the [0,1] invariant after every step.
  bool check_invariants = false;
};

struct TrainResult {
  Patch patch;
  TrainHistory history;
};

// delta <- clip(delta + step * sign(grad)), sign(0) = 0.
Patch ascent_step(const Patch& patch, const Tensor& grad, double step_size);

Patch init_patch(const TrainConfig& cfg, std::uint64_t seed);

// Sign-gradient EOT patch training. The adapter must be in inference mode.
TrainResult train_patch(const ModelAdapter& adapter, const Dataset& train, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});

}  // namespace patchforge

#endif  // PATCHFORGE_TRAINER_HPP_
