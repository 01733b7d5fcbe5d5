#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imil/augment.hpp"
#include "imil/dataset.hpp"
#include "imil/model.hpp"

namespace imil {

enum class AugmentationMode { none, mixup, cutmix, cutout, imil };

std::string_view to_string(AugmentationMode mode);
AugmentationMode parse_augmentation_mode(std::string_view text);

struct AugmentParams {
  double mixup_alpha = 0.2;
  double cutmix_alpha = 1.0;
  bool cutmix_independent_mu = false;
  int cutout_height = 50;
  int cutout_width = 50;
};

struct TrainRunConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 0.001;
  OptimizerConfig optimizer{};
  int image_size = 224;
  std::uint64_t seed = 0;
  AugmentationMode augmentation = AugmentationMode::none;
  AugmentParams augment{};

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

enum class HookSignal { proceed, pause_for_feedback };

struct EpochContext {
  int epoch;
  Backend& backend;
  TrainingStore& store;
  const TrainRunConfig& config;
};

/// Callback fired after every epoch's last weight update. Returning
/// pause_for_feedback makes the trainer call resolve() before continuing.
class EpochHook {
 public:
  virtual ~EpochHook() = default;
  virtual HookSignal on_epoch_end(EpochContext& context) = 0;
  virtual void resolve(EpochContext&) {}
};

/// The augmented batch actually fed to train_step.
struct BatchView {
  int epoch;
  std::size_t batch_index;
  std::span<const std::string> ids;
  std::span<const Image> images;
  std::span<const LabelVec> targets;
};

struct AugmentationCounters {
  std::size_t mixup_pairs = 0;
  std::size_t cutmix_boxes = 0;
  std::size_t cutout_masks = 0;
  long cutout_pixels = 0;  ///< sum of masked areas
};

struct TrainOptions {
  int first_epoch = 1;
  /// Skip training of `first_epoch` and only run its hooks (resuming a paused session).
  bool resume_at_epoch_end = false;
  std::function<void(const BatchView&)> batch_observer;
  /// Called with each epoch's record as soon as it is complete.
  std::function<void(const EpochRecord&)> epoch_observer;
  AugmentationCounters* counters = nullptr;
};

/// Seeded epoch/batch loop with soft-label cross-entropy. Batch order for an
/// epoch depends only on (seed, epoch); augmentation draws come from a
/// separate (seed, epoch) stream, so hooks never perturb either.
std::vector<EpochRecord> train(Backend& backend, TrainingStore& store,
                               const TrainRunConfig& config, std::span<EpochHook* const> hooks = {},
                               const TrainOptions& options = {});

/// Applies the configured batch augmentation in place (no-op for none/imil).
void augment_batch(std::vector<Image>& images, std::vector<LabelVec>& targets,
                   const TrainRunConfig& config, Rng& rng, AugmentationCounters* counters);

/// Per-epoch sample order.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

}  // namespace imil
