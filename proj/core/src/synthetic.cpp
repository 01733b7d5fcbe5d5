#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "imil/dataset.hpp"
#include "imil/errors.hpp"
#include "imil/rng.hpp"

namespace imil {
namespace {

constexpr double kBackground = 0.0;
constexpr double kMarkerLevel = 0.9;

bool within(const Rect& r, int size) {
  return r.row0 >= 0 && r.col0 >= 0 && r.row1 <= size && r.col1 <= size && !r.empty();
}

// Smooth Gaussian bump confined to `region`, center jittered by up to a quarter
// of the region extent.
void draw_blob(Image& image, const Rect& region, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> amplitude_dist(lo, hi);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  const double amplitude = amplitude_dist(rng);
  const double cy = region.row0 + region.height() * (0.5 + jitter(rng)) - 0.5;
  const double cx = region.col0 + region.width() * (0.5 + jitter(rng)) - 0.5;
  const double sigma = std::max(1.0, std::min(region.height(), region.width()) / 4.0);
  for (int ch = 0; ch < image.channels; ++ch) {
    for (int r = region.row0; r < region.row1; ++r) {
      for (int c = region.col0; c < region.col1; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        image.at(ch, r, c) += amplitude * std::exp(-d2 / (2 * sigma * sigma));
      }
    }
  }
}

void draw_marker(Image& image, const Rect& region) {
  for (int ch = 0; ch < image.channels; ++ch) {
    for (int r = region.row0; r < region.row1; ++r) {
      for (int c = region.col0; c < region.col1; ++c) image.at(ch, r, c) = kMarkerLevel;
    }
  }
}

TrainingStore make_split(const SyntheticSpec& spec, SplitTag tag, int per_class,
                         double correlation, Rng& rng, std::vector<std::string>& marked) {
  std::vector<int> labels;
  labels.reserve(2 * static_cast<std::size_t>(per_class));
  for (int c = 0; c < kNumClasses; ++c) labels.insert(labels.end(), per_class, c);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::bernoulli_distribution marker_if_positive(correlation);
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  const char* prefix = tag == SplitTag::train ? "train" : "test";

  std::vector<LabeledImage> samples;
  samples.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    Image image(1, spec.image_size, spec.image_size, kBackground);
    if (label == 1) {
      draw_blob(image, spec.signal_region, spec.signal_amplitude_min, spec.signal_amplitude_max, rng);
    }
    const bool marker = label == 1 && marker_if_positive(rng);
    if (marker) draw_marker(image, spec.spurious_region);
    if (spec.noise_std > 0.0) {
      for (auto& v : image.data) v += noise(rng);
    }
    for (auto& v : image.data) v = std::clamp(v, 0.0, 1.0);

    char id[32];
    std::snprintf(id, sizeof(id), "%s_%04zu", prefix, i);
    if (marker) marked.emplace_back(id);
    samples.push_back({id, std::move(image), label, false});
  }
  return TrainingStore(tag, std::move(samples));
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_per_class < 1 || test_n_per_class < 1) {
    throw ValidationError("synthetic: per-class counts must be positive");
  }
  if (image_size < 4) throw ValidationError("synthetic: image_size must be at least 4");
  if (!within(signal_region, image_size)) {
    throw ValidationError("synthetic: signal_region must be a nonempty rectangle inside the image");
  }
  if (!within(spurious_region, image_size)) {
    throw ValidationError(
        "synthetic: spurious_region must be a nonempty rectangle inside the image");
  }
  if (!intersect(signal_region, spurious_region).empty()) {
    throw ValidationError("synthetic: signal_region and spurious_region overlap");
  }
  auto unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!unit(spurious_train_correlation) || !unit(spurious_test_correlation)) {
    throw ValidationError("synthetic: correlations must lie in [0,1]");
  }
  if (!(signal_amplitude_min > 0.0) || signal_amplitude_max < signal_amplitude_min) {
    throw ValidationError("synthetic: signal amplitude range must satisfy 0 < min <= max");
  }
  if (!(noise_std >= 0.0)) throw ValidationError("synthetic: noise_std must be non-negative");
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  auto rng = make_rng(spec.seed, {stream::kSynthetic});
  SyntheticDataset out;
  out.signal_region = spec.signal_region;
  out.spurious_region = spec.spurious_region;
  out.train = make_split(spec, SplitTag::train, spec.n_per_class,
                         spec.spurious_train_correlation, rng, out.marked_ids);
  out.test = make_split(spec, SplitTag::test, spec.test_n_per_class,
                        spec.spurious_test_correlation, rng, out.marked_ids);
  return out;
}

bool has_marker(const Image& image, const Rect& spurious_region) {
  double sum = 0.0;
  for (int r = spurious_region.row0; r < spurious_region.row1; ++r) {
    for (int c = spurious_region.col0; c < spurious_region.col1; ++c) sum += image.at(0, r, c);
  }
  return sum / static_cast<double>(spurious_region.area()) > 0.5 * (kBackground + kMarkerLevel);
}

}  // namespace imil
