#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imil/augment.hpp"
#include "imil/errors.hpp"
#include "imil/rng.hpp"
#include "imil/session.hpp"

namespace imil {

/// The provider ran out of time; remaining cases are skipped.
class FeedbackTimeout : public Error {
 public:
  using Error::Error;
};

/// The reviewer went away (signal, server shutdown). The run persists its state.
class FeedbackInterrupted : public Error {
 public:
  using Error::Error;
};

/// A grid selection, or nullopt for an explicit skip.
struct FeedbackDecision {
  std::optional<GridSelection> selection;

  static FeedbackDecision skip() { return {}; }
  static FeedbackDecision select(GridSelection s) { return {std::move(s)}; }
  bool is_skip() const { return !selection.has_value(); }
};

/// Source of region feedback. Called serially, one case at a time.
class FeedbackProvider {
 public:
  virtual ~FeedbackProvider() = default;
  virtual void start(const FeedbackSession&) {}
  virtual FeedbackDecision resolve(const OutlierCase& outlier) = 0;
  virtual void finish(const FeedbackSession&) {}
};

struct ScriptedOptions {
  /// Missing sample ids raise NotFoundError instead of skipping.
  bool strict = false;
};

/// Replays resolutions recorded in session logs. `path` may be a single log
/// or a directory of `session_*.json` logs (matched to the live session by epoch).
class ScriptedProvider final : public FeedbackProvider {
 public:
  explicit ScriptedProvider(const std::filesystem::path& path, ScriptedOptions options = {});
  explicit ScriptedProvider(std::vector<SessionLog> logs, ScriptedOptions options = {});

  void start(const FeedbackSession& session) override;
  FeedbackDecision resolve(const OutlierCase& outlier) override;

 private:
  std::vector<SessionLog> logs_;
  const SessionLog* active_ = nullptr;
  ScriptedOptions options_;
};

enum class OraclePolicy { minimal_cover, exact_cover };

struct OracleSpec {
  Rect signal_region;
  OraclePolicy policy = OraclePolicy::exact_cover;
};

/// minimal_cover: the single cell with the largest overlap (ties -> lowest index).
/// exact_cover: every cell intersecting the region.
std::vector<int> oracle_cells(const OracleSpec& spec, const GridGeometry& grid);

/// Answers from the known location of the class signal.
class OracleProvider final : public FeedbackProvider {
 public:
  OracleProvider(OracleSpec spec, GridGeometry geometry);
  FeedbackDecision resolve(const OutlierCase& outlier) override;

 private:
  OracleSpec spec_;
  GridGeometry geometry_;
};

/// Selects `cells_per_case` cells uniformly at random (the unguided control).
/// Draws come from its own stream, never the training one.
class RandomProvider final : public FeedbackProvider {
 public:
  RandomProvider(std::size_t cells_per_case, std::uint64_t seed);
  FeedbackDecision resolve(const OutlierCase& outlier) override;

 private:
  std::size_t cells_per_case_;
  Rng rng_;
};

/// Returns a fixed decision for every case (tests, all-skip baselines).
class ConstantProvider final : public FeedbackProvider {
 public:
  /// Empty `cells` means skip.
  explicit ConstantProvider(std::vector<int> cells = {}) : cells_(std::move(cells)) {}
  FeedbackDecision resolve(const OutlierCase& outlier) override;

 private:
  std::vector<int> cells_;
};

}  // namespace imil
