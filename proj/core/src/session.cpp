#include "imil/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>

#include "imil/errors.hpp"

namespace imil {

std::string_view to_string(CaseStatus status) {
  switch (status) {
    case CaseStatus::pending: return "pending";
    case CaseStatus::resolved: return "resolved";
    case CaseStatus::skipped: return "skipped";
  }
  return "pending";
}

namespace {

CaseStatus parse_status(std::string_view s) {
  if (s == "resolved") return CaseStatus::resolved;
  if (s == "skipped") return CaseStatus::skipped;
  if (s == "pending") return CaseStatus::pending;
  throw ValidationError("unknown case status '" + std::string(s) + "'");
}

}  // namespace

bool FeedbackSession::complete() const {
  return std::all_of(cases.begin(), cases.end(),
                     [](const OutlierCase& c) { return c.status != CaseStatus::pending; });
}

std::size_t FeedbackSession::resolved_count() const {
  return static_cast<std::size_t>(std::count_if(
      cases.begin(), cases.end(), [](const OutlierCase& c) { return c.status != CaseStatus::pending; }));
}

OutlierCase* FeedbackSession::find(std::string_view sample_id) {
  for (auto& c : cases) {
    if (c.record.sample_id == sample_id) return &c;
  }
  return nullptr;
}

const OutlierCase* FeedbackSession::find(std::string_view sample_id) const {
  return const_cast<FeedbackSession*>(this)->find(sample_id);
}

std::vector<PredictionRecord> select_outliers(std::span<const PredictionRecord> records,
                                              std::size_t n) {
  std::vector<PredictionRecord> wrong;
  for (const auto& r : records) {
    if (!r.correct()) wrong.push_back(r);
  }
  std::sort(wrong.begin(), wrong.end(), [](const PredictionRecord& a, const PredictionRecord& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.sample_id < b.sample_id;
  });
  if (wrong.size() > n) wrong.resize(n);
  return wrong;
}

FeedbackSession build_session(std::span<const PredictionRecord> outliers,
                              const TrainingStore& store, const Backend& backend, int grid_size,
                              int epoch, std::string run) {
  if (outliers.empty()) throw ValidationError("build_session needs at least one outlier");
  if (grid_size < 2) throw ValidationError("grid_size must be >= 2");
  FeedbackSession session;
  session.run = std::move(run);
  session.epoch = epoch;
  session.session_id = session.run + "-epoch" + std::to_string(epoch);
  int rank = 0;
  for (const auto& record : outliers) {
    const auto& sample = store.at(record.sample_id);
    OutlierCase c;
    c.rank = ++rank;
    c.record = record;
    c.image = sample.pixels;
    c.heatmap = grad_cam(backend, sample.pixels, record.predicted_label);
    c.grid = GridGeometry{grid_size, grid_size, sample.pixels.height, sample.pixels.width};
    c.grid.validate();
    session.cases.push_back(std::move(c));
  }
  return session;
}

void apply_feedback(TrainingStore& store, OutlierCase& outlier, const GridSelection& selection) {
  if (outlier.status != CaseStatus::pending) {
    throw StateError("case '" + outlier.record.sample_id + "' is already " +
                     std::string(to_string(outlier.status)));
  }
  if (!(selection.geometry() == outlier.grid)) {
    throw ValidationError("selection grid does not match case '" + outlier.record.sample_id + "'");
  }
  store.replace(outlier.record.sample_id, blackout(outlier.image, selection));
  outlier.status = CaseStatus::resolved;
}

void skip_case(OutlierCase& outlier) {
  if (outlier.status != CaseStatus::pending) {
    throw StateError("case '" + outlier.record.sample_id + "' is already " +
                     std::string(to_string(outlier.status)));
  }
  outlier.status = CaseStatus::skipped;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string session_log_filename(std::string_view run, int epoch) {
  return "session_" + std::string(run) + "_" + std::to_string(epoch) + ".json";
}

nlohmann::ordered_json session_to_json(const FeedbackSession& session) {
  nlohmann::ordered_json j;
  j["format"] = "imil-session-log";
  j["version"] = 1;
  j["session_id"] = session.session_id;
  j["run"] = session.run;
  j["epoch"] = session.epoch;
  if (!session.cases.empty()) {
    const auto& g = session.cases.front().grid;
    j["grid"] = {{"rows", g.rows},
                 {"cols", g.cols},
                 {"image_height", g.image_height},
                 {"image_width", g.image_width}};
  }
  auto& cases = j["cases"] = nlohmann::ordered_json::array();
  for (const auto& c : session.cases) {
    cases.push_back({{"rank", c.rank},
                     {"sample_id", c.record.sample_id},
                     {"true_label", c.record.true_label},
                     {"predicted_label", c.record.predicted_label},
                     {"probabilities", {c.record.probabilities[0], c.record.probabilities[1]}},
                     {"confidence", c.record.confidence},
                     {"heatmap_class", c.heatmap.class_index},
                     {"status", to_string(c.status)}});
  }
  auto& res = j["resolutions"] = nlohmann::ordered_json::array();
  for (const auto& r : session.resolutions) {
    nlohmann::ordered_json entry{{"sample_id", r.sample_id},
                                 {"action", r.skipped ? "skip" : "selection"},
                                 {"cells", r.cells},
                                 {"timestamp", r.timestamp}};
    if (!r.note.empty()) entry["note"] = r.note;
    res.push_back(std::move(entry));
  }
  return j;
}

void write_session_log(const FeedbackSession& session, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write session log " + path.string());
    out << session_to_json(session).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

const Resolution* SessionLog::resolution_for(std::string_view sample_id) const {
  for (const auto& r : resolutions) {
    if (r.sample_id == sample_id) return &r;
  }
  return nullptr;
}

SessionLog session_log_from_json(const nlohmann::json& j) {
  try {
    SessionLog log;
    log.session_id = j.at("session_id").get<std::string>();
    log.run = j.value("run", std::string{});
    log.epoch = j.at("epoch").get<int>();
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      log.grid = {g.at("rows").get<int>(), g.at("cols").get<int>(),
                  g.at("image_height").get<int>(), g.at("image_width").get<int>()};
    }
    for (const auto& c : j.value("cases", nlohmann::json::array())) {
      SessionLog::CaseEntry e;
      e.rank = c.at("rank").get<int>();
      e.record.sample_id = c.at("sample_id").get<std::string>();
      e.record.true_label = c.at("true_label").get<int>();
      e.record.predicted_label = c.at("predicted_label").get<int>();
      const auto probs = c.at("probabilities").get<std::vector<double>>();
      if (probs.size() != 2) throw ValidationError("probabilities must have 2 entries");
      e.record.probabilities = {probs[0], probs[1]};
      e.record.confidence = c.at("confidence").get<double>();
      e.status = parse_status(c.value("status", std::string("pending")));
      log.cases.push_back(std::move(e));
    }
    for (const auto& r : j.value("resolutions", nlohmann::json::array())) {
      Resolution res;
      res.sample_id = r.at("sample_id").get<std::string>();
      const auto action = r.at("action").get<std::string>();
      if (action != "skip" && action != "selection") {
        throw ValidationError("unknown resolution action '" + action + "'");
      }
      res.skipped = action == "skip";
      res.cells = r.value("cells", std::vector<int>{});
      std::sort(res.cells.begin(), res.cells.end());
      res.timestamp = r.value("timestamp", std::string{});
      res.note = r.value("note", std::string{});
      log.resolutions.push_back(std::move(res));
    }
    return log;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed session log: ") + e.what());
  }
}

SessionLog read_session_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open session log " + path.string());
  try {
    return session_log_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace imil
