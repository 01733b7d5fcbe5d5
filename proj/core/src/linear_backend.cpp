#include <cmath>
#include <random>

#include "imil/errors.hpp"
#include "imil/model.hpp"
#include "imil/rng.hpp"

namespace imil {

LinearBackend::LinearBackend(int channels, int height, int width, std::uint64_t seed)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) throw ValidationError("linear backend: bad shape");
  const std::size_t d = static_cast<std::size_t>(channels) * height * width;
  params_.assign(2 * d + 2, 0.0);
  auto rng = make_rng(seed, {stream::kInit});
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  for (std::size_t i = 0; i < 2 * d; ++i) params_[i] = dist(rng);
}

std::string LinearBackend::architecture() const {
  return "linear-c" + std::to_string(channels_) + "-" + std::to_string(height_) + "x" +
         std::to_string(width_);
}

std::vector<Logits> LinearBackend::forward(std::span<const Image> images) const {
  const std::size_t d = params_.size() / 2 - 1;
  std::vector<Logits> out;
  out.reserve(images.size());
  for (const auto& image : images) {
    if (image.size() != d) throw ValidationError("linear backend: input shape mismatch");
    Logits l{params_[2 * d], params_[2 * d + 1]};
    for (std::size_t i = 0; i < d; ++i) {
      l[0] += params_[i] * image.data[i];
      l[1] += params_[d + i] * image.data[i];
    }
    out.push_back(l);
  }
  return out;
}

double LinearBackend::do_loss_and_gradient(std::span<const Image> images,
                                          std::span<const LabelVec> targets,
                                          std::vector<double>& grad,
                                          std::vector<Logits>* logits_out) const {
  const std::size_t d = params_.size() / 2 - 1;
  grad.assign(params_.size(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(images.size());
  const auto logits = forward(images);
  if (logits_out) *logits_out = logits;
  double loss = 0.0;
  for (std::size_t s = 0; s < images.size(); ++s) {
    const Probs p = softmax(logits[s]);
    const double mass = targets[s][0] + targets[s][1];
    for (int cls = 0; cls < 2; ++cls) {
      loss -= targets[s][cls] * std::log(p[cls]);
      const double g = (p[cls] * mass - targets[s][cls]) * inv_batch;
      grad[2 * d + cls] += g;
      double* row = grad.data() + cls * d;
      for (std::size_t i = 0; i < d; ++i) row[i] += g * images[s].data[i];
    }
  }
  return loss * inv_batch;
}

}  // namespace imil
