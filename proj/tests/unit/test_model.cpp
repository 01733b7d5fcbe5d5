#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "imil/checkpoint.hpp"
#include "imil/errors.hpp"
#include "imil/model.hpp"
#include "imil/trainer.hpp"
#include "test_util.hpp"

using namespace imil;

namespace {

struct Batch {
  std::vector<Image> images;
  std::vector<LabelVec> targets;
};

Batch random_batch(int n, int channels, int size, Rng& rng) {
  Batch b;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    b.images.push_back(testutil::random_image(channels, size, size, rng));
    const double w = u(rng);
    b.targets.push_back({w, 1.0 - w});
  }
  return b;
}

TrainingStore small_synthetic(std::uint64_t seed, int per_class = 12) {
  SyntheticSpec spec;
  spec.n_per_class = per_class;
  spec.test_n_per_class = 2;
  spec.image_size = 16;
  spec.signal_region = {2, 2, 7, 7};
  spec.spurious_region = {10, 10, 14, 14};
  spec.seed = seed;
  return generate_synthetic(spec).train;
}

TrainRunConfig small_config() {
  TrainRunConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.image_size = 16;
  cfg.learning_rate = 0.01;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(Softmax, SumsToOneAndStable) {
  auto p = softmax({1000.0, 999.0});
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  auto q = softmax({0.0, 0.0});
  EXPECT_DOUBLE_EQ(q[0], 0.5);
}

TEST(Prediction, ArgmaxAndConfidence) {
  auto r = make_prediction("a", 1, {0.3, 0.7});
  EXPECT_EQ(r.predicted_label, 1);
  EXPECT_DOUBLE_EQ(r.confidence, 0.7);
  EXPECT_TRUE(r.correct());
  auto tie = make_prediction("b", 1, {0.5, 0.5});
  EXPECT_EQ(tie.predicted_label, 0);
}

TEST(ReferenceCnn, ParameterGradientMatchesFiniteDifferences) {
  auto rng = make_rng(21);
  ReferenceCnn cnn(1, 16, 4);
  auto batch = random_batch(3, 1, 16, rng);
  EXPECT_LT(gradcheck::parameter_gradient_error(cnn, batch.images, batch.targets, 10, rng), 1e-3);
}

TEST(ReferenceCnn, MultiChannelGradient) {
  auto rng = make_rng(22);
  ReferenceCnn cnn(3, 16, 8);
  auto batch = random_batch(2, 3, 16, rng);
  EXPECT_LT(gradcheck::parameter_gradient_error(cnn, batch.images, batch.targets, 5, rng), 1e-3);
}

TEST(ReferenceCnn, TapGradient) {
  auto rng = make_rng(23);
  ReferenceCnn cnn(1, 16, 9);
  for (int cls = 0; cls < 2; ++cls) {
    auto img = testutil::random_image(1, 16, 16, rng);
    auto check = gradcheck::tap_gradient_error(cnn, img, cls, 10, rng);
    EXPECT_LT(check.gradient_error, 1e-3);
    EXPECT_LT(check.logit_error, 1e-9);
  }
  auto tap = cnn.saliency_tap(Image(1, 16, 16, 0.5), 1);
  EXPECT_EQ(tap.channels, ReferenceCnn::kStage2Filters);
  EXPECT_EQ(tap.height, cnn.feature_size());
  EXPECT_EQ(tap.width, cnn.feature_size());
}

TEST(ReferenceCnn, RejectsWrongInput) {
  ReferenceCnn cnn(1, 16, 0);
  const Image wrong[] = {Image(1, 12, 12)};
  EXPECT_THROW(cnn.forward(wrong), ValidationError);
}

TEST(ReferenceCnn, SeededInit) {
  ReferenceCnn a(1, 16, 3), b(1, 16, 3), c(1, 16, 4);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST(LinearBackend, GradientAndNoTap) {
  auto rng = make_rng(24);
  LinearBackend lin(1, 6, 6, 1);
  auto batch = random_batch(4, 1, 6, rng);
  EXPECT_LT(gradcheck::parameter_gradient_error(lin, batch.images, batch.targets, 10, rng), 1e-3);
  EXPECT_FALSE(lin.has_saliency_tap());
  EXPECT_THROW(lin.saliency_tap(batch.images[0], 0), CapabilityError);
}

TEST(Optimizer, SgdStep) {
  Optimizer opt;
  std::vector<double> p{1.0, 2.0};
  std::vector<double> g{0.5, -1.0};
  opt.step(p, g, 0.1);
  EXPECT_DOUBLE_EQ(p[0], 0.95);
  EXPECT_DOUBLE_EQ(p[1], 2.1);
}

TEST(Optimizer, MomentumAccumulates) {
  Optimizer opt({OptimizerKind::sgd, 0.9});
  std::vector<double> p{0.0};
  std::vector<double> g{1.0};
  opt.step(p, g, 1.0);
  opt.step(p, g, 1.0);
  EXPECT_DOUBLE_EQ(p[0], -(1.0 + 1.9));
}

TEST(Optimizer, AdamFirstStepIsLearningRate) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::adam;
  Optimizer opt(cfg);
  std::vector<double> p{0.0, 0.0};
  std::vector<double> g{3.0, -0.01};
  opt.step(p, g, 0.001);
  EXPECT_NEAR(p[0], -0.001, 1e-9);
  EXPECT_NEAR(p[1], 0.001, 1e-6);
}

TEST(Optimizer, StateRoundTrip) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::adam;
  Optimizer a(cfg), b(cfg);
  std::vector<double> pa{1.0, 2.0}, g{0.1, 0.2};
  a.step(pa, g, 0.01);
  b.set_state(a.state());
  std::vector<double> pb = pa;
  a.step(pa, g, 0.01);
  b.step(pb, g, 0.01);
  EXPECT_EQ(pa, pb);
}

TEST(Trainer, EpochOrderIsPermutationAndSeeded) {
  auto o = epoch_order(50, 3, 1);
  std::vector<std::size_t> sorted = o;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);
  EXPECT_EQ(o, epoch_order(50, 3, 1));
  EXPECT_NE(o, epoch_order(50, 3, 2));
}

TEST(Trainer, DeterministicAndLearns) {
  auto store = small_synthetic(1, 24);
  auto cfg = small_config();
  cfg.epochs = 8;
  cfg.optimizer.kind = OptimizerKind::adam;
  ReferenceCnn a(1, 16, 2), b(1, 16, 2);
  a.set_optimizer(cfg.optimizer);
  b.set_optimizer(cfg.optimizer);
  auto s1 = store, s2 = store;
  auto h1 = train(a, s1, cfg);
  auto h2 = train(b, s2, cfg);
  EXPECT_EQ(h1, h2);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  ASSERT_EQ(h1.size(), 8u);
  EXPECT_LT(h1.back().loss, h1.front().loss);
}

TEST(Trainer, HookSeesEveryEpochAndPauseResolves) {
  struct Probe : EpochHook {
    std::vector<int> seen;
    int resolved = 0;
    HookSignal on_epoch_end(EpochContext& ctx) override {
      seen.push_back(ctx.epoch);
      return ctx.epoch == 2 ? HookSignal::pause_for_feedback : HookSignal::proceed;
    }
    void resolve(EpochContext&) override { ++resolved; }
  } probe;
  auto store = small_synthetic(2);
  auto cfg = small_config();
  LinearBackend lin(1, 16, 16, 0);
  EpochHook* hooks[] = {&probe};
  train(lin, store, cfg, hooks);
  EXPECT_EQ(probe.seen, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(probe.resolved, 1);
}

TEST(Trainer, AugmentationModesRun) {
  for (auto mode : {AugmentationMode::mixup, AugmentationMode::cutmix, AugmentationMode::cutout}) {
    auto store = small_synthetic(3);
    auto cfg = small_config();
    cfg.epochs = 1;
    cfg.augmentation = mode;
    cfg.augment.cutout_height = 4;
    cfg.augment.cutout_width = 4;
    AugmentationCounters counters;
    TrainOptions opts;
    opts.counters = &counters;
    LinearBackend lin(1, 16, 16, 0);
    train(lin, store, cfg, {}, opts);
    if (mode == AugmentationMode::cutout) {
      EXPECT_EQ(counters.cutout_masks, store.size());
      EXPECT_EQ(counters.cutout_pixels, static_cast<long>(store.size()) * 16);
    } else if (mode == AugmentationMode::mixup) {
      EXPECT_GT(counters.mixup_pairs, 0u);
    } else {
      EXPECT_GT(counters.cutmix_boxes, 0u);
    }
  }
}

TEST(Trainer, ModeNames) {
  for (auto m : {AugmentationMode::none, AugmentationMode::mixup, AugmentationMode::cutmix,
                 AugmentationMode::cutout, AugmentationMode::imil})
    EXPECT_EQ(parse_augmentation_mode(to_string(m)), m);
  EXPECT_THROW(parse_augmentation_mode("rotate"), ValidationError);
}

TEST(Trainer, ConfigValidation) {
  auto cfg = small_config();
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = small_config();
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Checkpoint, RoundTripAndMismatch) {
  testutil::TempDir dir;
  auto store = small_synthetic(4);
  auto cfg = small_config();
  cfg.optimizer.kind = OptimizerKind::adam;
  ReferenceCnn cnn(1, 16, 1);
  cnn.set_optimizer(cfg.optimizer);
  train(cnn, store, cfg);
  save_checkpoint(dir / "m.ckpt", cnn, {kCheckpointFormatVersion, cnn.architecture(), 1, 3});
  ReferenceCnn back(1, 16, 99);
  back.set_optimizer(cfg.optimizer);
  auto manifest = load_checkpoint(dir / "m.ckpt", back);
  EXPECT_EQ(manifest.epoch, 3);
  EXPECT_EQ(back.snapshot(), cnn.snapshot());
  ReferenceCnn other(1, 20, 1);
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt", other), ValidationError);
}

TEST(Checkpoint, HistoryCsv) {
  testutil::TempDir dir;
  std::vector<EpochRecord> h{{1, 0.693, 0.5}, {2, 0.25, 0.875}};
  write_history_csv(dir / "h.csv", h);
  EXPECT_EQ(read_history_csv(dir / "h.csv"), h);
}

TEST(Predict, AllRecordsConsistent) {
  auto store = small_synthetic(5);
  ReferenceCnn cnn(1, 16, 5);
  auto recs = predict_all(cnn, store, 7);
  ASSERT_EQ(recs.size(), store.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].sample_id, store[i].id);
    EXPECT_NEAR(recs[i].probabilities[0] + recs[i].probabilities[1], 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(recs[i].confidence, std::max(recs[i].probabilities[0], recs[i].probabilities[1]));
  }
}
