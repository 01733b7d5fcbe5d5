#include "imil/feedback.hpp"

#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

namespace imil {

namespace {

std::vector<SessionLog> load_logs(const std::filesystem::path& path) {
  std::vector<SessionLog> logs;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && name.rfind("session_", 0) == 0 &&
          entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) logs.push_back(read_session_log(f));
    if (logs.empty()) throw NotFoundError("no session logs in " + path.string());
  } else {
    logs.push_back(read_session_log(path));
  }
  return logs;
}

}  // namespace

ScriptedProvider::ScriptedProvider(const std::filesystem::path& path, ScriptedOptions options)
    : ScriptedProvider(load_logs(path), options) {}

ScriptedProvider::ScriptedProvider(std::vector<SessionLog> logs, ScriptedOptions options)
    : logs_(std::move(logs)), options_(options) {
  if (logs_.empty()) throw ValidationError("scripted provider needs at least one session log");
  active_ = &logs_.front();
}

void ScriptedProvider::start(const FeedbackSession& session) {
  if (logs_.size() == 1) {
    active_ = &logs_.front();
    return;
  }
  active_ = nullptr;
  for (const auto& log : logs_) {
    if (log.epoch == session.epoch) active_ = &log;
  }
  if (active_ == nullptr) {
    if (options_.strict) {
      throw NotFoundError("no recorded session for epoch " + std::to_string(session.epoch));
    }
    spdlog::warn("scripted feedback: no recorded session for epoch {}; skipping all cases",
                 session.epoch);
  }
}

FeedbackDecision ScriptedProvider::resolve(const OutlierCase& outlier) {
  const auto& id = outlier.record.sample_id;
  const Resolution* recorded = active_ ? active_->resolution_for(id) : nullptr;
  if (recorded == nullptr) {
    if (options_.strict) throw NotFoundError("session log has no resolution for '" + id + "'");
    spdlog::warn("scripted feedback: no resolution for '{}'; skipping", id);
    return FeedbackDecision::skip();
  }
  if (recorded->skipped) return FeedbackDecision::skip();
  return FeedbackDecision::select(
      GridSelection(outlier.grid, std::set<int>(recorded->cells.begin(), recorded->cells.end())));
}

std::vector<int> oracle_cells(const OracleSpec& spec, const GridGeometry& grid) {
  grid.validate();
  const Rect image{0, 0, grid.image_height, grid.image_width};
  if (spec.signal_region.empty() || !(intersect(spec.signal_region, image) == spec.signal_region)) {
    throw ValidationError("oracle signal region must be a nonempty rectangle inside the image");
  }
  std::vector<int> cells;
  int best = -1;
  long best_overlap = 0;
  for (int cell = 0; cell < grid.cell_count(); ++cell) {
    const long overlap = intersect(cell_bounds(grid, cell), spec.signal_region).area();
    if (overlap > 0) cells.push_back(cell);
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = cell;
    }
  }
  if (spec.policy == OraclePolicy::minimal_cover) return {best};
  return cells;
}

OracleProvider::OracleProvider(OracleSpec spec, GridGeometry geometry)
    : spec_(spec), geometry_(geometry) {
  oracle_cells(spec_, geometry_);  // validates region and geometry
}

FeedbackDecision OracleProvider::resolve(const OutlierCase& outlier) {
  const auto cells = oracle_cells(spec_, outlier.grid);
  return FeedbackDecision::select(GridSelection(outlier.grid, {cells.begin(), cells.end()}));
}

RandomProvider::RandomProvider(std::size_t cells_per_case, std::uint64_t seed)
    : cells_per_case_(cells_per_case), rng_(make_rng(seed, {stream::kFeedback})) {
  if (cells_per_case_ == 0) throw ValidationError("random provider must select at least one cell");
}

FeedbackDecision RandomProvider::resolve(const OutlierCase& outlier) {
  std::vector<int> all(static_cast<std::size_t>(outlier.grid.cell_count()));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng_);
  all.resize(std::min(cells_per_case_, all.size()));
  return FeedbackDecision::select(GridSelection(outlier.grid, {all.begin(), all.end()}));
}

FeedbackDecision ConstantProvider::resolve(const OutlierCase& outlier) {
  if (cells_.empty()) return FeedbackDecision::skip();
  return FeedbackDecision::select(GridSelection(outlier.grid, {cells_.begin(), cells_.end()}));
}

}  // namespace imil
