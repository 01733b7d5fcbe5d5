#include "imil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "imil/errors.hpp"
#include "imil/rng.hpp"

namespace imil {

std::string_view to_string(AugmentationMode mode) {
  switch (mode) {
    case AugmentationMode::none: return "none";
    case AugmentationMode::mixup: return "mixup";
    case AugmentationMode::cutmix: return "cutmix";
    case AugmentationMode::cutout: return "cutout";
    case AugmentationMode::imil: return "imil";
  }
  return "none";
}

AugmentationMode parse_augmentation_mode(std::string_view text) {
  for (auto mode : {AugmentationMode::none, AugmentationMode::mixup, AugmentationMode::cutmix,
                    AugmentationMode::cutout, AugmentationMode::imil}) {
    if (text == to_string(mode)) return mode;
  }
  if (text == "baseline") return AugmentationMode::none;
  throw ValidationError("unknown augmentation mode '" + std::string(text) +
                        "' (expected none, mixup, cutmix, cutout or imil)");
}

void TrainRunConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (image_size < 1) throw ValidationError("image_size must be positive");
  if (augment.mixup_alpha <= 0.0 || augment.cutmix_alpha <= 0.0) {
    throw ValidationError("Beta alpha parameters must be positive");
  }
  if (augment.cutout_height < 0 || augment.cutout_width < 0) {
    throw ValidationError("cutout mask size must be non-negative");
  }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void augment_batch(std::vector<Image>& images, std::vector<LabelVec>& targets,
                   const TrainRunConfig& config, Rng& rng, AugmentationCounters* counters) {
  const auto& a = config.augment;
  switch (config.augmentation) {
    case AugmentationMode::none:
    case AugmentationMode::imil:
      return;
    case AugmentationMode::cutout:
      for (auto& image : images) {
        const Rect box =
            sample_cutout_box(image.height, image.width, a.cutout_height, a.cutout_width, rng);
        for (int ch = 0; ch < image.channels; ++ch) {
          for (int r = box.row0; r < box.row1; ++r) {
            for (int c = box.col0; c < box.col1; ++c) image.at(ch, r, c) = 0.0;
          }
        }
        if (counters) {
          ++counters->cutout_masks;
          counters->cutout_pixels += box.area();
        }
      }
      return;
    case AugmentationMode::mixup:
    case AugmentationMode::cutmix: {
      // Partner of sample i is perm[i]; mixing reads the unaugmented batch.
      std::vector<std::size_t> perm(images.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto source_images = images;
      const auto source_targets = targets;
      for (std::size_t i = 0; i < images.size(); ++i) {
        const std::size_t j = perm[i];
        if (config.augmentation == AugmentationMode::mixup) {
          const double lam = sample_lambda(a.mixup_alpha, rng);
          auto mixed = mixup(source_images[i], source_targets[i], source_images[j],
                             source_targets[j], lam);
          images[i] = std::move(mixed.image);
          targets[i] = mixed.label;
          if (counters) ++counters->mixup_pairs;
        } else {
          const double lam = sample_lambda(a.cutmix_alpha, rng);
          auto mixed = cutmix(source_images[i], source_targets[i], source_images[j],
                              source_targets[j], lam, rng,
                              {a.cutmix_independent_mu, a.cutmix_alpha});
          images[i] = std::move(mixed.image);
          targets[i] = mixed.label;
          if (counters) ++counters->cutmix_boxes;
        }
      }
      return;
    }
  }
}

std::vector<EpochRecord> train(Backend& backend, TrainingStore& store,
                               const TrainRunConfig& config, std::span<EpochHook* const> hooks,
                               const TrainOptions& options) {
  config.validate();
  if (store.empty()) throw ValidationError("cannot train on an empty store");
  if (options.first_epoch < 1 || options.first_epoch > config.epochs) {
    throw ValidationError("first_epoch outside [1, epochs]");
  }

  std::vector<EpochRecord> history;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<Image> images;
  std::vector<LabelVec> targets;
  std::vector<std::string> ids;
  std::vector<Logits> logits;

  for (int epoch = options.first_epoch; epoch <= config.epochs; ++epoch) {
    const bool skip_training = options.resume_at_epoch_end && epoch == options.first_epoch;
    if (!skip_training) {
      const auto order = epoch_order(store.size(), config.seed, epoch);
      auto aug_rng = make_rng(config.seed, {stream::kAugment, static_cast<std::uint64_t>(epoch)});
      double loss_sum = 0.0;
      std::size_t correct = 0;
      std::size_t batch_index = 0;
      for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
        const std::size_t stop = std::min(order.size(), start + batch_size);
        images.clear();
        targets.clear();
        ids.clear();
        for (std::size_t k = start; k < stop; ++k) {
          const auto& sample = store[order[k]];
          images.push_back(sample.pixels);
          targets.push_back(one_hot(sample.label));
          ids.push_back(sample.id);
        }
        augment_batch(images, targets, config, aug_rng, options.counters);
        if (options.batch_observer) {
          options.batch_observer(BatchView{epoch, batch_index, ids, images, targets});
        }

        double loss = 0.0;
        try {
          loss = backend.train_step(images, targets, config.learning_rate, &logits);
        } catch (const Error& e) {
          throw TrainingError("epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index) + ": " + e.what());
        }
        if (!std::isfinite(loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index) + " (learning_rate " +
                              std::to_string(config.learning_rate) + ")");
        }
        for (std::size_t k = 0; k < logits.size(); ++k) {
          const int predicted = logits[k][1] > logits[k][0] ? 1 : 0;
          const int target = targets[k][1] > targets[k][0] ? 1 : 0;
          if (predicted == target) ++correct;
        }
        loss_sum += loss * static_cast<double>(stop - start);
      }
      const auto n = static_cast<double>(store.size());
      history.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n});
      spdlog::debug("epoch {:3d}  loss {:.6f}  train_acc {:.4f}", epoch, history.back().loss,
                    history.back().train_acc);
      if (options.epoch_observer) options.epoch_observer(history.back());
    }

    EpochContext context{epoch, backend, store, config};
    for (auto* hook : hooks) {
      if (hook->on_epoch_end(context) == HookSignal::pause_for_feedback) {
        hook->resolve(context);
      }
    }
  }
  return history;
}

}  // namespace imil
