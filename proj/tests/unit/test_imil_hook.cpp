#include <gtest/gtest.h>

#include <set>

#include "imil/errors.hpp"
#include "imil/imil_hook.hpp"
#include "test_util.hpp"

using namespace imil;

namespace {

struct Fixture {
  SyntheticDataset data;
  TrainRunConfig cfg;

  Fixture() {
    SyntheticSpec spec;
    spec.n_per_class = 10;
    spec.test_n_per_class = 2;
    spec.image_size = 16;
    spec.signal_region = {2, 2, 7, 7};
    spec.spurious_region = {10, 10, 14, 14};
    spec.seed = 8;
    data = generate_synthetic(spec);
    cfg.epochs = 3;
    cfg.batch_size = 5;
    cfg.image_size = 16;
    cfg.learning_rate = 1e-4;
    cfg.seed = 4;
  }

  ImilConfig imil(int epoch = 2, int n = 6) const {
    ImilConfig c;
    c.epochs = {epoch};
    c.num_outliers = n;
    return c;
  }
};

struct Run {
  BackendSnapshot params;
  TrainingStore store;
  std::vector<FeedbackSession> sessions;
};

Run run_with(Fixture& f, FeedbackProvider* provider, ImilConfig config = {}, ImilHookOptions opts = {}) {
  ReferenceCnn cnn(1, 16, 6);
  TrainingStore store = f.data.train;
  if (!provider) {
    train(cnn, store, f.cfg);
    return {cnn.snapshot(), store, {}};
  }
  ImilHook hook(config, *provider, opts);
  EpochHook* hooks[] = {&hook};
  train(cnn, store, f.cfg, hooks);
  return {cnn.snapshot(), store, hook.sessions()};
}

class ThrowingProvider final : public FeedbackProvider {
 public:
  explicit ThrowingProvider(int after, bool timeout) : after_(after), timeout_(timeout) {}
  FeedbackDecision resolve(const OutlierCase& c) override {
    if (calls_++ >= after_) {
      if (timeout_) throw FeedbackTimeout("too slow");
      throw Error("reviewer crashed");
    }
    std::set<int> all;
    for (int i = 0; i < c.grid.cell_count(); ++i) all.insert(i);
    return FeedbackDecision::select(GridSelection(c.grid, {0}));
  }
  int calls_ = 0;

 private:
  int after_;
  bool timeout_;
};

}  // namespace

TEST(ImilConfig, Validation) {
  ImilConfig c;
  c.epochs = {70};
  EXPECT_NO_THROW(c.validate(100));
  EXPECT_THROW(c.validate(50), ValidationError);
  c.num_outliers = 0;
  EXPECT_THROW(c.validate(100), ValidationError);
  c = {};
  c.grid_size = 1;
  EXPECT_THROW(c.validate(100), ValidationError);
}

TEST(ImilHook, OneSessionAtConfiguredEpoch) {
  Fixture f;
  f.cfg.epochs = 4;
  std::vector<int> built;
  ImilHookOptions opts;
  opts.on_session_built = [&](const FeedbackSession& s) { built.push_back(s.epoch); };
  ConstantProvider skip;
  auto run = run_with(f, &skip, f.imil(3), opts);
  ASSERT_EQ(run.sessions.size(), 1u);
  EXPECT_EQ(run.sessions[0].epoch, 3);
  EXPECT_EQ(built, (std::vector<int>{3}));
}

TEST(ImilHook, AllSkipMatchesBaseline) {
  Fixture f;
  auto base = run_with(f, nullptr);
  ConstantProvider skip;
  auto imil = run_with(f, &skip, f.imil());
  ASSERT_EQ(imil.sessions.size(), 1u);
  EXPECT_FALSE(imil.sessions[0].cases.empty());
  EXPECT_EQ(imil.params, base.params);
  EXPECT_EQ(imil.store, base.store);
}

TEST(ImilHook, OracleKeepsOnlySignalCells) {
  Fixture f;
  OracleSpec spec{f.data.signal_region, OraclePolicy::exact_cover};
  OracleProvider oracle(spec, {4, 4, 16, 16});
  auto run = run_with(f, &oracle, f.imil());
  ASSERT_EQ(run.sessions.size(), 1u);
  const auto allowed = oracle_cells(spec, {4, 4, 16, 16});
  const std::set<int> allowed_set(allowed.begin(), allowed.end());
  std::set<std::string> resolved;
  for (const auto& c : run.sessions[0].cases) {
    EXPECT_EQ(c.status, CaseStatus::resolved);
    resolved.insert(c.record.sample_id);
  }
  std::set<std::string> replaced;
  for (const auto& s : run.store) {
    if (!s.replaced) continue;
    replaced.insert(s.id);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (s.pixels.at(0, y, x) != 0.0) EXPECT_TRUE(allowed_set.count(cell_at({4, 4, 16, 16}, y, x)));
  }
  EXPECT_EQ(replaced, resolved);
  EXPECT_LE(replaced.size(), 6u);
}

TEST(ImilHook, TimeoutSkipsRemainder) {
  Fixture f;
  ThrowingProvider p(2, true);
  auto run = run_with(f, &p, f.imil());
  const auto& s = run.sessions.at(0);
  ASSERT_GT(s.cases.size(), 2u);
  EXPECT_TRUE(s.complete());
  for (std::size_t i = 0; i < s.cases.size(); ++i) {
    EXPECT_EQ(s.cases[i].status, i < 2 ? CaseStatus::resolved : CaseStatus::skipped);
    if (i >= 2) EXPECT_EQ(s.resolutions[i].note, "timeout");
  }
  EXPECT_EQ(p.calls_, 3);
}

TEST(ImilHook, ConfiguredTimeoutSkipsEverything) {
  Fixture f;
  auto cfg = f.imil();
  cfg.session_timeout_seconds = 1e-9;
  ConstantProvider all({0});
  auto run = run_with(f, &all, cfg);
  for (const auto& c : run.sessions.at(0).cases) EXPECT_EQ(c.status, CaseStatus::skipped);
}

TEST(ImilHook, ProviderFailurePersistsLog) {
  testutil::TempDir dir;
  Fixture f;
  ThrowingProvider p(1, false);
  ImilHookOptions opts;
  opts.log_dir = dir.path();
  opts.run_name = "crash";
  EXPECT_THROW(run_with(f, &p, f.imil(), opts), Error);
  auto log = read_session_log(dir / session_log_filename("crash", 2));
  EXPECT_EQ(log.resolutions.size(), 1u);
  EXPECT_FALSE(log.cases.empty());
}

TEST(ImilHook, PriorResolutionsAreReused) {
  testutil::TempDir dir;
  Fixture f;
  ImilHookOptions opts;
  opts.log_dir = dir.path();
  ConstantProvider first({1, 2});
  auto a = run_with(f, &first, f.imil(), opts);

  ImilHookOptions again;
  again.prior = {read_session_log(dir / session_log_filename("run", 2))};
  ThrowingProvider never(0, false);
  auto b = run_with(f, &never, f.imil(), again);
  EXPECT_EQ(never.calls_, 0);
  EXPECT_EQ(a.store, b.store);
  EXPECT_EQ(a.params, b.params);
}

TEST(ImilHook, NoMispredictionsGivesEmptySession) {
  Fixture f;
  f.cfg.epochs = 1;
  auto cfg = f.imil(1);
  ConstantProvider never({0});
  TrainingStore store = f.data.train;
  // Relabel everything to what an untrained net predicts so nothing is wrong.
  ReferenceCnn cnn(1, 16, 6);
  ImilHook hook(cfg, never);
  EpochHook* hooks[] = {&hook};
  TrainRunConfig tiny = f.cfg;
  tiny.learning_rate = 1e-12;
  auto preds = predict_all(cnn, store);
  std::vector<LabeledImage> relabeled;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto s = store[i];
    s.label = preds[i].predicted_label;
    relabeled.push_back(s);
  }
  TrainingStore agree(SplitTag::train, relabeled);
  train(cnn, agree, tiny, hooks);
  ASSERT_EQ(hook.sessions().size(), 1u);
  EXPECT_TRUE(hook.sessions()[0].cases.empty());
}
