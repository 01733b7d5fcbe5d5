#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "imil/augment.hpp"
#include "imil/dataset.hpp"
#include "imil/model.hpp"
#include "imil/saliency.hpp"

namespace imil {

enum class CaseStatus { pending, resolved, skipped };

std::string_view to_string(CaseStatus status);

/// One misprediction packaged for review. `image` is the training pixels at
/// selection time; `heatmap` explains the predicted (wrong) class.
struct OutlierCase {
  int rank = 0;  ///< 1-based position in descending-confidence order
  PredictionRecord record;
  Image image;
  Heatmap heatmap;
  GridGeometry grid;
  CaseStatus status = CaseStatus::pending;
};

struct Resolution {
  std::string sample_id;
  bool skipped = false;
  std::vector<int> cells;  ///< ascending; empty when skipped
  std::string timestamp;   ///< ISO-8601 UTC
  std::string note;        ///< e.g. "timeout"

  bool operator==(const Resolution&) const = default;
};

struct FeedbackSession {
  std::string session_id;
  std::string run;
  int epoch = 0;
  std::vector<OutlierCase> cases;
  std::vector<Resolution> resolutions;  ///< in the order they were made

  bool complete() const;
  std::size_t resolved_count() const;  ///< resolved + skipped
  OutlierCase* find(std::string_view sample_id);
  const OutlierCase* find(std::string_view sample_id) const;
};

/// Mispredictions only, by confidence descending then sample_id ascending,
/// truncated to `n`.
std::vector<PredictionRecord> select_outliers(std::span<const PredictionRecord> records,
                                              std::size_t n);

/// Packages every outlier with its pixel snapshot, Grad-CAM of the predicted
/// class and the grid geometry. All cases start pending.
FeedbackSession build_session(std::span<const PredictionRecord> outliers,
                              const TrainingStore& store, const Backend& backend, int grid_size,
                              int epoch, std::string run);

/// Blackout-replaces the case's sample in `store` and marks the case resolved.
/// StateError if the case is not pending; ValidationError (case untouched) if
/// the selection's geometry differs from the case grid.
void apply_feedback(TrainingStore& store, OutlierCase& outlier, const GridSelection& selection);

void skip_case(OutlierCase& outlier);

std::string utc_timestamp();

std::string session_log_filename(std::string_view run, int epoch);

nlohmann::ordered_json session_to_json(const FeedbackSession& session);
void write_session_log(const FeedbackSession& session, const std::filesystem::path& path);

/// Case metadata and resolutions as recorded on disk (no pixels).
struct SessionLog {
  std::string session_id;
  std::string run;
  int epoch = 0;
  GridGeometry grid;
  struct CaseEntry {
    int rank = 0;
    PredictionRecord record;
    CaseStatus status = CaseStatus::pending;
  };
  std::vector<CaseEntry> cases;
  std::vector<Resolution> resolutions;

  const Resolution* resolution_for(std::string_view sample_id) const;
};

SessionLog session_log_from_json(const nlohmann::json& j);
SessionLog read_session_log(const std::filesystem::path& path);

}  // namespace imil
