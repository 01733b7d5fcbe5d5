#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "imil/dataset.hpp"
#include "imil/errors.hpp"
#include "imil/image_io.hpp"
#include "imil/trainer.hpp"
#include "test_util.hpp"

using namespace imil;

namespace {

TrainingStore make_store(int n0, int n1, int size = 4) {
  std::vector<LabeledImage> samples;
  for (int i = 0; i < n0 + n1; ++i) {
    samples.push_back({"s" + std::to_string(i), Image(1, size, size, i / 1000.0), i < n0 ? 0 : 1});
  }
  return TrainingStore(SplitTag::train, std::move(samples));
}

int count_label(const TrainingStore& s, int label) {
  return static_cast<int>(std::count_if(s.begin(), s.end(), [&](const auto& x) { return x.label == label; }));
}

void write_gray(const std::filesystem::path& path, const std::vector<std::uint8_t>& px, int w, int h) {
  auto bytes = encode_png(px, w, h, 1);
  write_bytes(path, bytes);
}

}  // namespace

TEST(Store, RejectsDuplicateIdsAndBadLabels) {
  std::vector<LabeledImage> dup{{"a", Image(1, 2, 2), 0}, {"a", Image(1, 2, 2), 1}};
  EXPECT_THROW(TrainingStore(SplitTag::train, dup), ValidationError);
  std::vector<LabeledImage> bad{{"a", Image(1, 2, 2), 2}};
  EXPECT_THROW(TrainingStore(SplitTag::train, bad), ValidationError);
}

TEST(Store, ReplaceChangesOnlyPixels) {
  auto store = make_store(2, 2);
  const auto before = store.snapshot();
  store.replace("s1", Image(1, 4, 4, 0.0));
  EXPECT_TRUE(store.at("s1").replaced);
  EXPECT_EQ(store.at("s1").label, 0);
  for (double v : store.at("s1").pixels.data) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (store[i].id != "s1") EXPECT_EQ(store[i], before[i]);
  }
}

TEST(Store, ReplaceErrors) {
  auto store = make_store(2, 2);
  EXPECT_THROW(store.replace("zzz", Image(1, 4, 4)), NotFoundError);
  EXPECT_THROW(store.replace("s0", Image(1, 5, 4)), ValidationError);
  EXPECT_FALSE(store.at("s0").replaced);
}

TEST(Store, ReplacementVisibleToTraining) {
  auto store = make_store(4, 4);
  Image marked(1, 4, 4, 0.0);
  marked.at(0, 1, 2) = 0.625;
  store.replace("s5", marked);

  LinearBackend backend(1, 4, 4, 3);
  TrainRunConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 3;
  cfg.image_size = 4;
  bool seen = false;
  TrainOptions opts;
  opts.batch_observer = [&](const BatchView& view) {
    for (std::size_t i = 0; i < view.ids.size(); ++i) {
      if (view.ids[i] == "s5") {
        EXPECT_EQ(view.images[i], store.at("s5").pixels);
        seen = true;
      }
    }
  };
  train(backend, store, cfg, {}, opts);
  EXPECT_TRUE(seen);
}

TEST(Split, PaperSizes) {
  auto store = make_store(336, 326);
  auto [train, test] = split_dataset(store, 0.8, 7);
  EXPECT_EQ(train.size(), 530u);
  EXPECT_EQ(test.size(), 132u);
  std::set<std::string> ids;
  for (const auto& s : train) ids.insert(s.id);
  for (const auto& s : test) EXPECT_FALSE(ids.count(s.id));
}

TEST(Split, PerClassRounding) {
  auto store = make_store(6, 4);
  auto [train, test] = split_dataset(store, 0.5, 1);
  EXPECT_EQ(count_label(train, 0), 3);
  EXPECT_EQ(count_label(train, 1), 2);
  EXPECT_EQ(test.size(), 5u);
}

TEST(Split, Deterministic) {
  auto store = make_store(5, 5);
  auto a = split_dataset(store, 0.8, 11);
  auto b = split_dataset(store, 0.8, 11);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Split, NeedsTwoPerClass) {
  auto store = make_store(5, 1);
  EXPECT_THROW(split_dataset(store, 0.8, 0), ValidationError);
}

TEST(Manifest, LoadsInOrder) {
  testutil::TempDir dir;
  write_gray(dir / "a.png", {0, 64, 128, 255}, 2, 2);
  write_gray(dir / "b.png", {10, 20, 30, 40}, 2, 2);
  testutil::spit(dir / "m.csv", "id,filepath,label\nb,b.png,1\na,a.png,0\n");
  auto store = load_manifest(dir / "m.csv", dir.path(), {2, 1});
  ASSERT_EQ(store.size(), 2u);
  EXPECT_EQ(store[0].id, "b");
  EXPECT_EQ(store[1].id, "a");
  EXPECT_EQ(store[0].label, 1);
}

TEST(Manifest, ScalesBytesToUnitRange) {
  testutil::TempDir dir;
  const std::vector<std::uint8_t> raw{0, 17, 200, 255};
  write_gray(dir / "a.png", raw, 2, 2);
  testutil::spit(dir / "m.csv", "id,filepath,label\na,a.png,0\n");
  auto store = load_manifest(dir / "m.csv", dir.path(), {2, 1});
  const auto& px = store[0].pixels.data;
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_DOUBLE_EQ(px[i], raw[i] / 255.0);
  EXPECT_EQ(*std::max_element(px.begin(), px.end()), 1.0);
}

TEST(Manifest, DuplicateIdNamed) {
  testutil::TempDir dir;
  write_gray(dir / "a.png", {0, 0, 0, 0}, 2, 2);
  testutil::spit(dir / "m.csv", "id,filepath,label\ns1,a.png,0\ns1,a.png,1\n");
  try {
    load_manifest(dir / "m.csv", dir.path(), {2, 1});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos);
  }
}

TEST(Manifest, MissingFileNamesId) {
  testutil::TempDir dir;
  testutil::spit(dir / "m.csv", "id,filepath,label\nghost,none.png,0\n");
  try {
    load_manifest(dir / "m.csv", dir.path(), {2, 1});
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Manifest, BadLabel) {
  testutil::TempDir dir;
  write_gray(dir / "a.png", {0, 0, 0, 0}, 2, 2);
  testutil::spit(dir / "m.csv", "id,filepath,label\na,a.png,3\n");
  EXPECT_THROW(load_manifest(dir / "m.csv", dir.path(), {2, 1}), ValidationError);
}

TEST(Manifest, ExportRoundTrip) {
  testutil::TempDir dir;
  SyntheticSpec spec;
  spec.n_per_class = 3;
  spec.test_n_per_class = 2;
  auto data = generate_synthetic(spec);
  export_manifest(data.train, dir / "out");
  auto back = load_manifest(dir / "out" / "manifest.csv", dir / "out", {28, 1});
  ASSERT_EQ(back.size(), data.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, data.train[i].id);
    EXPECT_EQ(back[i].label, data.train[i].label);
    for (std::size_t k = 0; k < back[i].pixels.size(); ++k)
      EXPECT_NEAR(back[i].pixels.data[k], data.train[i].pixels.data[k], 0.5 / 255.0 + 1e-12);
  }
}

TEST(StoreFile, ExactRoundTrip) {
  testutil::TempDir dir;
  SyntheticSpec spec;
  spec.n_per_class = 4;
  spec.test_n_per_class = 1;
  auto data = generate_synthetic(spec);
  data.train.replace(data.train[2].id, Image(1, 28, 28, 0.125));
  save_store(data.train, dir / "s.bin");
  EXPECT_EQ(load_store(dir / "s.bin"), data.train);
  testutil::spit(dir / "junk.bin", "nope");
  EXPECT_THROW(load_store(dir / "junk.bin"), IoError);
}

TEST(Synthetic, MarkerFollowsCorrelation) {
  SyntheticSpec spec;
  auto data = generate_synthetic(spec);
  for (const auto& s : data.train) {
    EXPECT_EQ(has_marker(s.pixels, data.spurious_region), s.label == 1) << s.id;
  }
  for (const auto& s : data.test) EXPECT_FALSE(has_marker(s.pixels, data.spurious_region)) << s.id;
  EXPECT_EQ(data.marked_ids.size(), static_cast<std::size_t>(spec.n_per_class));
}

TEST(Synthetic, BlobOnlyInClassOne) {
  SyntheticSpec spec;
  spec.noise_std = 0.0;
  auto data = generate_synthetic(spec);
  const Rect r = data.signal_region;
  for (const auto& s : data.train) {
    double peak = 0.0;
    for (int y = r.row0; y < r.row1; ++y)
      for (int x = r.col0; x < r.col1; ++x) peak = std::max(peak, s.pixels.at(0, y, x));
    if (s.label == 1) EXPECT_GE(peak, spec.signal_amplitude_min * 0.5) << s.id;
    else EXPECT_EQ(peak, 0.0) << s.id;
  }
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec spec;
  spec.seed = 42;
  auto a = generate_synthetic(spec);
  auto b = generate_synthetic(spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  spec.seed = 43;
  EXPECT_FALSE(generate_synthetic(spec).train == a.train);
}

TEST(Synthetic, NoiselessClassZeroIdenticalOutsideMarker) {
  SyntheticSpec spec;
  spec.noise_std = 0.0;
  spec.spurious_train_correlation = 0.5;
  auto data = generate_synthetic(spec);
  const LabeledImage* first = nullptr;
  for (const auto& s : data.train) {
    if (s.label != 0) continue;
    if (!first) {
      first = &s;
      continue;
    }
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x)
        if (!data.spurious_region.contains(y, x)) ASSERT_EQ(s.pixels.at(0, y, x), first->pixels.at(0, y, x));
  }
}

TEST(Synthetic, ValuesInUnitRange) {
  SyntheticSpec spec;
  spec.noise_std = 0.3;
  auto data = generate_synthetic(spec);
  for (const auto& s : data.train)
    for (double v : s.pixels.data) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Synthetic, RejectsOverlapAndBadCorrelation) {
  SyntheticSpec spec;
  spec.spurious_region = {6, 6, 10, 10};
  EXPECT_THROW(generate_synthetic(spec), ValidationError);
  spec = {};
  spec.spurious_train_correlation = 1.5;
  EXPECT_THROW(generate_synthetic(spec), ValidationError);
}
