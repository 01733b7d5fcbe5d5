#include <gtest/gtest.h>

#include <set>

#include "imil/errors.hpp"
#include "imil/feedback.hpp"
#include "test_util.hpp"

using namespace imil;

namespace {

const GridGeometry kGrid{4, 4, 28, 28};

OutlierCase case_for(const std::string& id) {
  OutlierCase c;
  c.rank = 1;
  c.record = make_prediction(id, 1, {0.9, 0.1});
  c.grid = kGrid;
  c.image = Image(1, 28, 28, 0.5);
  return c;
}

SessionLog log_with(std::vector<Resolution> res, int epoch = 1) {
  SessionLog log;
  log.run = "r";
  log.epoch = epoch;
  log.grid = kGrid;
  log.resolutions = std::move(res);
  return log;
}

/// Brute force: cells whose pixel area meets the rectangle.
std::set<int> touched(const Rect& region) {
  std::set<int> out;
  for (int y = region.row0; y < region.row1; ++y)
    for (int x = region.col0; x < region.col1; ++x) out.insert(cell_at(kGrid, y, x));
  return out;
}

}  // namespace

TEST(Scripted, LooksUpBySampleId) {
  ScriptedProvider p({log_with({{"s7", false, {5}, "", ""}, {"s8", true, {}, "", ""}})});
  FeedbackSession session;
  session.epoch = 1;
  p.start(session);
  auto d = p.resolve(case_for("s7"));
  ASSERT_FALSE(d.is_skip());
  EXPECT_EQ(d.selection->sorted_cells(), (std::vector<int>{5}));
  EXPECT_TRUE(p.resolve(case_for("s8")).is_skip());
  EXPECT_TRUE(p.resolve(case_for("s9")).is_skip());
}

TEST(Scripted, StrictNamesMissingId) {
  ScriptedProvider p({log_with({{"s7", false, {5}, "", ""}})}, {true});
  FeedbackSession session;
  session.epoch = 1;
  p.start(session);
  try {
    p.resolve(case_for("s9"));
    FAIL();
  } catch (const NotFoundError& e) {
    EXPECT_NE(std::string(e.what()).find("s9"), std::string::npos);
  }
}

TEST(Scripted, PicksLogByEpoch) {
  ScriptedProvider p({log_with({{"a", false, {1}, "", ""}}, 3), log_with({{"a", false, {2}, "", ""}}, 5)});
  FeedbackSession session;
  session.epoch = 5;
  p.start(session);
  EXPECT_EQ(p.resolve(case_for("a")).selection->sorted_cells(), (std::vector<int>{2}));
}

TEST(Scripted, DirectoryWithoutLogs) {
  testutil::TempDir dir;
  EXPECT_THROW(ScriptedProvider p(dir.path()), NotFoundError);
}

TEST(Oracle, ContainedRegion) {
  const Rect cell10 = cell_bounds(kGrid, 10);
  const Rect inner{cell10.row0 + 1, cell10.col0 + 1, cell10.row1 - 1, cell10.col1 - 1};
  for (auto policy : {OraclePolicy::minimal_cover, OraclePolicy::exact_cover})
    EXPECT_EQ(oracle_cells({inner, policy}, kGrid), (std::vector<int>{10}));
}

TEST(Oracle, EqualStraddleTakesLowestIndex) {
  const Rect c5 = cell_bounds(kGrid, 5);
  const Rect region{c5.row0 + 1, c5.col1 - 2, c5.row0 + 4, c5.col1 + 2};
  EXPECT_EQ(oracle_cells({region, OraclePolicy::minimal_cover}, kGrid), (std::vector<int>{5}));
  EXPECT_EQ(oracle_cells({region, OraclePolicy::exact_cover}, kGrid), (std::vector<int>{5, 6}));
}

TEST(Oracle, ExactCoverOfFourCells) {
  const Rect c5 = cell_bounds(kGrid, 5);
  const Rect region{c5.row1 - 3, c5.col1 - 3, c5.row1 + 3, c5.col1 + 3};
  EXPECT_EQ(oracle_cells({region, OraclePolicy::exact_cover}, kGrid), (std::vector<int>{5, 6, 9, 10}));
}

TEST(Oracle, RandomRegionsAgreeWithPixelScan) {
  auto rng = make_rng(61);
  std::uniform_int_distribution<int> coord(0, 27);
  for (int t = 0; t < 300; ++t) {
    int a = coord(rng), b = coord(rng), c = coord(rng), d = coord(rng);
    Rect r{std::min(a, b), std::min(c, d), std::max(a, b) + 1, std::max(c, d) + 1};
    const auto exact = oracle_cells({r, OraclePolicy::exact_cover}, kGrid);
    const auto want = touched(r);
    EXPECT_EQ(std::set<int>(exact.begin(), exact.end()), want);
    const auto minimal = oracle_cells({r, OraclePolicy::minimal_cover}, kGrid);
    ASSERT_EQ(minimal.size(), 1u);
    EXPECT_TRUE(want.count(minimal[0]));
    long best = 0;
    for (int cell : want) best = std::max(best, intersect(r, cell_bounds(kGrid, cell)).area());
    EXPECT_EQ(intersect(r, cell_bounds(kGrid, minimal[0])).area(), best);
  }
}

TEST(Oracle, ProviderAnswersEveryCase) {
  OracleProvider p({{4, 4, 12, 12}, OraclePolicy::exact_cover}, kGrid);
  auto d = p.resolve(case_for("x"));
  ASSERT_FALSE(d.is_skip());
  EXPECT_EQ(d.selection->sorted_cells(), oracle_cells({{4, 4, 12, 12}, OraclePolicy::exact_cover}, kGrid));
  EXPECT_THROW(OracleProvider({{20, 20, 40, 40}, OraclePolicy::exact_cover}, kGrid), ValidationError);
}

TEST(Random, CountAndDeterminism) {
  RandomProvider a(3, 9), b(3, 9);
  for (int t = 0; t < 20; ++t) {
    auto da = a.resolve(case_for("x"));
    auto db = b.resolve(case_for("x"));
    EXPECT_EQ(da.selection->cells().size(), 3u);
    EXPECT_EQ(da.selection->cells(), db.selection->cells());
  }
  EXPECT_THROW(RandomProvider(0, 1), ValidationError);
}

TEST(Constant, SkipOrFixed) {
  ConstantProvider skip;
  EXPECT_TRUE(skip.resolve(case_for("x")).is_skip());
  ConstantProvider fixed({3, 1});
  EXPECT_EQ(fixed.resolve(case_for("x")).selection->sorted_cells(), (std::vector<int>{1, 3}));
}
