#include "imil/model.hpp"

#include <algorithm>
#include <cmath>

#include "imil/errors.hpp"

namespace imil {

Probs softmax(const Logits& logits) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double z = e0 + e1;
  return {e0 / z, e1 / z};
}

void Optimizer::step(std::span<double> params, std::span<const double> grad,
                     double learning_rate) {
  if (params.size() != grad.size()) throw ValidationError("optimizer: gradient size mismatch");
  ++steps_;
  switch (config_.kind) {
    case OptimizerKind::sgd:
      if (config_.momentum == 0.0) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grad[i];
        return;
      }
      first_.resize(params.size(), 0.0);
      for (std::size_t i = 0; i < params.size(); ++i) {
        first_[i] = config_.momentum * first_[i] + grad[i];
        params[i] -= learning_rate * first_[i];
      }
      return;
    case OptimizerKind::adam: {
      first_.resize(params.size(), 0.0);
      second_.resize(params.size(), 0.0);
      const double t = static_cast<double>(steps_);
      const double c1 = 1.0 - std::pow(config_.beta1, t);
      const double c2 = 1.0 - std::pow(config_.beta2, t);
      for (std::size_t i = 0; i < params.size(); ++i) {
        first_[i] = config_.beta1 * first_[i] + (1 - config_.beta1) * grad[i];
        second_[i] = config_.beta2 * second_[i] + (1 - config_.beta2) * grad[i] * grad[i];
        params[i] -= learning_rate * (first_[i] / c1) / (std::sqrt(second_[i] / c2) + config_.epsilon);
      }
      return;
    }
  }
}

// Layout: [steps, |first|, first..., |second|, second...]
std::vector<double> Optimizer::state() const {
  std::vector<double> out;
  out.reserve(3 + first_.size() + second_.size());
  out.push_back(static_cast<double>(steps_));
  out.push_back(static_cast<double>(first_.size()));
  out.insert(out.end(), first_.begin(), first_.end());
  out.push_back(static_cast<double>(second_.size()));
  out.insert(out.end(), second_.begin(), second_.end());
  return out;
}

void Optimizer::set_state(std::span<const double> state) {
  if (state.empty()) {
    steps_ = 0;
    first_.clear();
    second_.clear();
    return;
  }
  auto bad = [] { return ValidationError("optimizer: malformed state"); };
  std::size_t pos = 0;
  auto take = [&](std::size_t n) {
    if (pos + n > state.size()) throw bad();
    auto s = state.subspan(pos, n);
    pos += n;
    return s;
  };
  steps_ = static_cast<std::uint64_t>(take(1)[0]);
  auto first = take(static_cast<std::size_t>(take(1)[0]));
  first_.assign(first.begin(), first.end());
  auto second = take(static_cast<std::size_t>(take(1)[0]));
  second_.assign(second.begin(), second.end());
  if (pos != state.size()) throw bad();
}

SaliencyTap Backend::saliency_tap(const Image&, int) const {
  throw CapabilityError("backend '" + architecture() + "' has no saliency tap");
}

std::vector<Probs> Backend::probabilities(std::span<const Image> images) const {
  const auto logits = forward(images);
  std::vector<Probs> out;
  out.reserve(logits.size());
  for (const auto& l : logits) out.push_back(softmax(l));
  return out;
}

double Backend::loss_and_gradient(std::span<const Image> images,
                                  std::span<const LabelVec> targets, std::vector<double>& grad,
                                  std::vector<Logits>* logits) const {
  if (images.size() != targets.size() || images.empty()) {
    throw ValidationError("loss_and_gradient: need equally many images and targets (>0)");
  }
  if (logits) logits->clear();
  return do_loss_and_gradient(images, targets, grad, logits);
}

double Backend::train_step(std::span<const Image> images, std::span<const LabelVec> targets,
                           double learning_rate, std::vector<Logits>* logits) {
  const double loss = loss_and_gradient(images, targets, grad_, logits);
  optimizer_.step(parameters(), grad_, learning_rate);
  return loss;
}

BackendSnapshot Backend::snapshot() const {
  const auto p = parameters();
  return {{p.begin(), p.end()}, optimizer_.state()};
}

void Backend::restore(const BackendSnapshot& snapshot) {
  auto p = parameters();
  if (snapshot.parameters.size() != p.size()) {
    throw ValidationError("snapshot has " + std::to_string(snapshot.parameters.size()) +
                          " parameters, backend expects " + std::to_string(p.size()));
  }
  std::copy(snapshot.parameters.begin(), snapshot.parameters.end(), p.begin());
  optimizer_.set_state(snapshot.optimizer_state);
}

std::unique_ptr<Backend> reference_backend(int channels, int image_size, std::uint64_t seed) {
  return std::make_unique<ReferenceCnn>(channels, image_size, seed);
}

PredictionRecord make_prediction(std::string sample_id, int true_label, const Probs& probs) {
  PredictionRecord r;
  r.sample_id = std::move(sample_id);
  r.true_label = true_label;
  r.probabilities = probs;
  r.predicted_label = probs[1] > probs[0] ? 1 : 0;
  r.confidence = probs[r.predicted_label];
  return r;
}

std::vector<PredictionRecord> predict_all(const Backend& backend, const TrainingStore& store,
                                          std::size_t batch_size) {
  if (batch_size == 0) batch_size = 1;
  std::vector<PredictionRecord> records;
  records.reserve(store.size());
  std::vector<Image> batch;
  for (std::size_t start = 0; start < store.size(); start += batch_size) {
    const std::size_t stop = std::min(store.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < stop; ++i) batch.push_back(store[i].pixels);
    const auto probs = backend.probabilities(batch);
    for (std::size_t i = start; i < stop; ++i) {
      records.push_back(make_prediction(store[i].id, store[i].label, probs[i - start]));
    }
  }
  return records;
}

}  // namespace imil
