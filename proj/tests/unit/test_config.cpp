#include <gtest/gtest.h>

#include <algorithm>

#include "imil/config.hpp"
#include "test_util.hpp"

using namespace imil;

namespace {

bool mentions(const ConfigError& e, const std::string& needle) {
  return std::any_of(e.issues().begin(), e.issues().end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

ConfigError config_error(const std::string& ini) {
  try {
    config_from_sections(parse_ini(ini));
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "expected ConfigError";
  return ConfigError({});
}

}  // namespace

TEST(Ini, ParsesSectionsAndComments) {
  auto s = parse_ini("# top\n[run]\nname = demo  # trailing\n; note\n\n[train]\nepochs=5\n");
  EXPECT_EQ(s["run"]["name"], "demo");
  EXPECT_EQ(s["train"]["epochs"], "5");
}

TEST(Ini, Malformed) {
  try {
    parse_ini("epochs = 3\n[train\nfoo\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.issues().size(), 3u);
  }
}

TEST(Config, Defaults) {
  auto c = config_from_sections({});
  EXPECT_EQ(c.run_name, "run");
  EXPECT_EQ(c.output_dir(), std::filesystem::path("runs") / "run");
  EXPECT_EQ(c.imil.num_outliers, 20);
  EXPECT_EQ(c.imil.epochs, (std::vector<int>{70}));
  EXPECT_EQ(c.imil.grid_size, 4);
  EXPECT_EQ(c.eval.ece_bins, 15);
  EXPECT_EQ(c.train.epochs, 100);
  EXPECT_EQ(c.train.image_size, 224);
  EXPECT_EQ(c.feedback.oracle_policy, OraclePolicy::exact_cover);
}

TEST(Config, ReadsEverySection) {
  auto c = config_from_sections(parse_ini(R"(
[run]
name = exp1
seed = 9
backend = linear
[train]
epochs = 30
batch_size = 16
learning_rate = 0.0001
image_size = 28
augmentation = imil
optimizer = adam
[augment]
cutout_height = 7
cutout_width = 5
[imil]
num_outliers = 12
epoch = 10, 20
grid_size = 4
feedback = random
random_cells = 3
session_timeout = 30
[synthetic]
n_per_class = 50
signal_amplitude_min = 0.2
signal_amplitude_max = 0.4
[eval]
ece_bins = 10
cam_samples = train_0001, test_0002
)"), "/base");
  EXPECT_EQ(c.run_name, "exp1");
  EXPECT_EQ(c.backend, BackendKind::linear);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.synthetic.seed, 9u);
  EXPECT_EQ(c.train.optimizer.kind, OptimizerKind::adam);
  EXPECT_EQ(c.train.augmentation, AugmentationMode::imil);
  EXPECT_EQ(c.train.augment.cutout_width, 5);
  EXPECT_EQ(c.imil.epochs, (std::vector<int>{10, 20}));
  EXPECT_EQ(c.feedback.kind, FeedbackSourceKind::random);
  EXPECT_EQ(c.feedback.random_cells, 3);
  ASSERT_TRUE(c.imil.session_timeout_seconds);
  EXPECT_DOUBLE_EQ(*c.imil.session_timeout_seconds, 30.0);
  EXPECT_EQ(c.synthetic.n_per_class, 50);
  EXPECT_DOUBLE_EQ(c.synthetic.signal_amplitude_max, 0.4);
  EXPECT_EQ(c.eval.cam_samples, (std::vector<std::string>{"train_0001", "test_0002"}));
  EXPECT_EQ(c.oracle_region(), c.synthetic.signal_region);
}

TEST(Config, DefaultRegionsScaleWithImageSize) {
  auto c = config_from_sections(parse_ini("[train]\nimage_size = 56\n"));
  EXPECT_EQ(c.synthetic.signal_region, (Rect{8, 8, 24, 24}));
}

TEST(Config, UnknownKeysAndSections) {
  auto e = config_error("[train]\nepochz = 3\n[bogus]\nx = 1\n");
  EXPECT_TRUE(mentions(e, "train.epochz"));
  EXPECT_TRUE(mentions(e, "[bogus]"));
}

TEST(Config, FieldLevelIssues) {
  auto e = config_error("[train]\nepochs = 10\nlearning_rate = -1\nbatch_size = x\naugmentation = imil\n[imil]\nepoch = 70\n");
  EXPECT_TRUE(mentions(e, "train.learning_rate"));
  EXPECT_TRUE(mentions(e, "train.batch_size"));
  EXPECT_TRUE(mentions(e, "imil.epoch"));
}

TEST(Config, ManifestAndSyntheticExclusive) {
  auto e = config_error("[data]\nsource = synthetic\nmanifest = m.csv\n");
  EXPECT_TRUE(mentions(e, "data.manifest"));
  auto m = config_error("[data]\nsource = manifest\n");
  EXPECT_TRUE(mentions(m, "data.manifest"));
}

TEST(Config, ScriptedNeedsPath) {
  auto e = config_error("[train]\naugmentation = imil\nepochs = 80\n[imil]\nfeedback = scripted\n");
  EXPECT_TRUE(mentions(e, "imil.scripted_path"));
}

TEST(Config, RelativePathsResolveAgainstBase) {
  auto c = config_from_sections(parse_ini("[data]\nsource = manifest\nmanifest = data/m.csv\n"), "/cfg");
  EXPECT_EQ(c.manifest.manifest, std::filesystem::path("/cfg/data/m.csv"));
}

TEST(Config, JsonRoundTrip) {
  testutil::TempDir dir;
  auto c = config_from_sections(parse_ini(
      "[run]\nname = rt\n[train]\nepochs = 12\nimage_size = 28\naugmentation = imil\n[imil]\nepoch = 6\nfeedback = oracle\noracle_policy = minimal_cover\n"));
  const auto j = config_to_json(c);
  testutil::spit(dir / "config.resolved.json", j.dump(2));
  auto back = load_config(dir / "config.resolved.json");
  EXPECT_EQ(config_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.feedback.oracle_policy, OraclePolicy::minimal_cover);
}

TEST(Config, LoadIniFile) {
  testutil::TempDir dir;
  testutil::spit(dir / "exp.ini", "[run]\nname = fromfile\n");
  EXPECT_EQ(load_config(dir / "exp.ini").run_name, "fromfile");
  EXPECT_THROW(load_config(dir / "missing.ini"), IoError);
}

TEST(Config, FeedbackFlag) {
  ExperimentConfig c;
  apply_feedback_flag(c, "scripted:logs/a.json");
  EXPECT_EQ(c.feedback.kind, FeedbackSourceKind::scripted);
  EXPECT_EQ(c.feedback.scripted_path, std::filesystem::path("logs/a.json"));
  apply_feedback_flag(c, "interactive");
  EXPECT_EQ(c.feedback.kind, FeedbackSourceKind::interactive);
  EXPECT_THROW(apply_feedback_flag(c, "psychic"), ValidationError);
}
