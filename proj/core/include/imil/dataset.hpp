#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "imil/image.hpp"

namespace imil {

inline constexpr int kNumClasses = 2;

struct LabeledImage {
  std::string id;
  Image pixels;
  int label = 0;
  bool replaced = false;

  bool operator==(const LabeledImage&) const = default;
};

enum class SplitTag { train, test };

/// Ordered, id-addressable collection of samples. Ids are unique and labels
/// binary; replacement may only change pixels (never id, label or shape).
class TrainingStore {
 public:
  TrainingStore() = default;
  TrainingStore(SplitTag tag, std::vector<LabeledImage> samples);

  SplitTag split() const { return split_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  const LabeledImage& operator[](std::size_t i) const { return samples_[i]; }
  std::span<const LabeledImage> samples() const { return samples_; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  bool contains(std::string_view id) const;
  const LabeledImage& at(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  /// Overwrites the pixels of one sample and marks it replaced.
  /// Throws NotFoundError for an unknown id, ValidationError on shape mismatch.
  void replace(std::string_view id, Image pixels);

  /// Deep copy of the current contents, safe to hand to another thread.
  std::vector<LabeledImage> snapshot() const { return samples_; }

  bool operator==(const TrainingStore& other) const {
    return split_ == other.split_ && samples_ == other.samples_;
  }

 private:
  SplitTag split_ = SplitTag::train;
  std::vector<LabeledImage> samples_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline void replace_sample(TrainingStore& store, std::string_view id, Image pixels) {
  store.replace(id, std::move(pixels));
}

struct LoadOptions {
  int image_size = 224;
  int channels = 1;
};

/// Reads a CSV manifest with header `id,filepath,label`. Relative file paths
/// resolve against `image_root`. Images are resized to image_size x image_size.
TrainingStore load_manifest(const std::filesystem::path& manifest,
                            const std::filesystem::path& image_root,
                            const LoadOptions& options = {});

/// Writes `manifest.csv` plus one PNG per sample into `dir`.
void export_manifest(const TrainingStore& store, const std::filesystem::path& dir);

/// Stratified, seeded split. Train size is round(n * fraction); per-class
/// quotas use largest-remainder rounding.
std::pair<TrainingStore, TrainingStore> split_dataset(const TrainingStore& store,
                                                      double train_fraction, std::uint64_t seed);

/// Exact binary serialization (doubles verbatim) for byte-level comparisons.
void save_store(const TrainingStore& store, const std::filesystem::path& path);
TrainingStore load_store(const std::filesystem::path& path);

struct SyntheticSpec {
  int n_per_class = 200;
  int test_n_per_class = 100;
  int image_size = 28;
  Rect signal_region{4, 4, 12, 12};
  Rect spurious_region{19, 19, 25, 25};
  double spurious_train_correlation = 1.0;
  double spurious_test_correlation = 0.0;
  double noise_std = 0.05;
  /// Peak height of the class-1 blob, drawn uniformly per image.
  double signal_amplitude_min = 0.45;
  double signal_amplitude_max = 0.75;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  TrainingStore train;
  TrainingStore test;
  Rect signal_region;
  Rect spurious_region;
  /// Sample ids carrying the spurious marker.
  std::vector<std::string> marked_ids;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// True when the spurious marker is drawn in `image` (used by oracles in tests).
bool has_marker(const Image& image, const Rect& spurious_region);

}  // namespace imil
