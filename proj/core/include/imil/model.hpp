#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "imil/augment.hpp"
#include "imil/dataset.hpp"
#include "imil/image.hpp"

namespace imil {

using Logits = std::array<double, 2>;
using Probs = std::array<double, 2>;

Probs softmax(const Logits& logits);

/// Activations of the tapped feature map and d(class score)/d(activation),
/// both channel-major K x h x w.
struct SaliencyTap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> activations;
  std::vector<double> gradients;
  std::string layer;
};

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First-order update rule with its own state (velocity / moments).
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  void step(std::span<double> params, std::span<const double> grad, double learning_rate);

  const OptimizerConfig& config() const { return config_; }
  std::vector<double> state() const;
  void set_state(std::span<const double> state);

 private:
  OptimizerConfig config_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::uint64_t steps_ = 0;
};

struct BackendSnapshot {
  std::vector<double> parameters;
  std::vector<double> optimizer_state;
  bool operator==(const BackendSnapshot&) const = default;
};

/// Two-class differentiable classifier. Implementations provide the forward
/// pass and the batch-mean soft-label cross-entropy gradient; the optimizer
/// step, snapshots and probability helpers live here.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string architecture() const = 0;
  virtual std::vector<Logits> forward(std::span<const Image> images) const = 0;

  /// Mean cross-entropy of softmax(logits) against `targets`; writes dLoss/dparams
  /// into `grad` and, when given, the batch logits into `logits`.
  double loss_and_gradient(std::span<const Image> images, std::span<const LabelVec> targets,
                           std::vector<double>& grad, std::vector<Logits>* logits = nullptr) const;

  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;

  virtual bool has_saliency_tap() const { return false; }
  /// Throws CapabilityError unless has_saliency_tap().
  virtual SaliencyTap saliency_tap(const Image& image, int class_index) const;

  std::vector<Probs> probabilities(std::span<const Image> images) const;

  /// One optimizer update on the batch; returns the pre-update loss.
  double train_step(std::span<const Image> images, std::span<const LabelVec> targets,
                    double learning_rate, std::vector<Logits>* logits = nullptr);

  void set_optimizer(OptimizerConfig config) { optimizer_ = Optimizer(config); }
  const Optimizer& optimizer() const { return optimizer_; }

  BackendSnapshot snapshot() const;
  void restore(const BackendSnapshot& snapshot);

 private:
  virtual double do_loss_and_gradient(std::span<const Image> images,
                                      std::span<const LabelVec> targets, std::vector<double>& grad,
                                      std::vector<Logits>* logits) const = 0;

  Optimizer optimizer_;
  std::vector<double> grad_;
};

/// Small conv net: [conv3x3 -> ReLU -> avgpool2] x 2 -> global average pool
/// -> linear(2). The tapped map is the second pooled stage.
class ReferenceCnn final : public Backend {
 public:
  static constexpr int kStage1Filters = 8;
  static constexpr int kStage2Filters = 16;

  ReferenceCnn(int channels, int image_size, std::uint64_t seed);

  std::string architecture() const override;
  std::vector<Logits> forward(std::span<const Image> images) const override;
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  bool has_saliency_tap() const override { return true; }
  SaliencyTap saliency_tap(const Image& image, int class_index) const override;

  int channels() const { return channels_; }
  int image_size() const { return image_size_; }
  /// Spatial extent of the tapped feature map.
  int feature_size() const { return image_size_ / 4; }

  /// Head weights (2 x kStage2Filters, then 2 biases) inside parameters().
  std::span<double> head_parameters();

 private:
  struct Cache;
  double do_loss_and_gradient(std::span<const Image> images, std::span<const LabelVec> targets,
                              std::vector<double>& grad, std::vector<Logits>* logits) const override;

  Logits forward_one(const Image& image, Cache* cache) const;
  void check_input(const Image& image) const;

  int channels_;
  int image_size_;
  std::vector<double> params_;
  std::size_t w1_, b1_, w2_, b2_, wf_, bf_;
};

/// Multinomial logistic regression on raw pixels. No saliency tap.
class LinearBackend final : public Backend {
 public:
  LinearBackend(int channels, int height, int width, std::uint64_t seed);

  std::string architecture() const override;
  std::vector<Logits> forward(std::span<const Image> images) const override;
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }

 private:
  double do_loss_and_gradient(std::span<const Image> images, std::span<const LabelVec> targets,
                              std::vector<double>& grad, std::vector<Logits>* logits) const override;

  int channels_, height_, width_;
  std::vector<double> params_;
};

std::unique_ptr<Backend> reference_backend(int channels, int image_size, std::uint64_t seed);

struct PredictionRecord {
  std::string sample_id;
  int true_label = 0;
  int predicted_label = 0;
  Probs probabilities{};
  double confidence = 0.0;

  bool correct() const { return predicted_label == true_label; }
  bool operator==(const PredictionRecord&) const = default;
};

/// argmax with ties to the lower class index; confidence = max probability.
PredictionRecord make_prediction(std::string sample_id, int true_label, const Probs& probs);

std::vector<PredictionRecord> predict_all(const Backend& backend, const TrainingStore& store,
                                          std::size_t batch_size = 64);

}  // namespace imil
