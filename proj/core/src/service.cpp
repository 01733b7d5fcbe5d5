#include "imil/service.hpp"

#include <algorithm>
#include <set>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "imil/errors.hpp"
#include "imil/image_io.hpp"

namespace imil {

void SessionBoard::publish(const FeedbackSession& session) {
  std::vector<CaseEntry> cases;
  std::map<std::string, std::size_t> index;
  for (const auto& c : session.cases) {
    CaseEntry e;
    e.rank = c.rank;
    e.sample_id = c.record.sample_id;
    e.record = c.record;
    e.grid = c.grid;
    e.image_png = std::make_shared<const std::vector<std::uint8_t>>(encode_png(c.image));
    e.heatmap_png =
        std::make_shared<const std::vector<std::uint8_t>>(overlay_png(c.image, c.heatmap));
    for (const auto& r : session.resolutions) {
      if (r.sample_id == e.sample_id) e.resolution = r;
    }
    index.emplace(e.sample_id, cases.size());
    cases.push_back(std::move(e));
  }
  {
    std::lock_guard lock(mutex_);
    active_ = true;
    session_id_ = session.session_id;
    epoch_ = session.epoch;
    cases_ = std::move(cases);
    index_ = std::move(index);
  }
  changed_.notify_all();
}

void SessionBoard::close() {
  {
    std::lock_guard lock(mutex_);
    active_ = false;
  }
  changed_.notify_all();
}

bool SessionBoard::active() const {
  std::lock_guard lock(mutex_);
  return active_;
}

std::optional<SessionView> SessionBoard::view() const {
  std::lock_guard lock(mutex_);
  if (!active_) return std::nullopt;
  SessionView v{session_id_, epoch_, cases_.size(), 0, {}};
  for (const auto& c : cases_) {
    if (c.resolution) {
      ++v.resolved_count;
    } else {
      v.pending_case_ids.push_back(c.sample_id);
    }
  }
  return v;
}

std::string SessionBoard::render_case_json(const CaseEntry& c) const {
  nlohmann::ordered_json j;
  j["sample_id"] = c.sample_id;
  j["rank"] = c.rank;
  j["predicted_label"] = c.record.predicted_label;
  j["confidence"] = c.record.confidence;
  j["true_label"] = c.record.true_label;
  j["grid"] = {{"rows", c.grid.rows}, {"cols", c.grid.cols}};
  j["image_size"] = {{"height", c.grid.image_height}, {"width", c.grid.image_width}};
  j["status"] = !c.resolution ? "pending" : (c.resolution->skipped ? "skipped" : "resolved");
  if (c.resolution && !c.resolution->skipped) j["cells"] = c.resolution->cells;
  j["image_url"] = "/cases/" + c.sample_id + "/image.png";
  j["heatmap_url"] = "/cases/" + c.sample_id + "/heatmap.png";
  return j.dump();
}

std::optional<std::string> SessionBoard::case_json(const std::string& sample_id) const {
  std::lock_guard lock(mutex_);
  if (!active_) return std::nullopt;
  const auto it = index_.find(sample_id);
  if (it == index_.end()) return std::nullopt;
  return render_case_json(cases_[it->second]);
}

std::shared_ptr<const std::vector<std::uint8_t>> SessionBoard::image_png(
    const std::string& sample_id) const {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(sample_id);
  if (!active_ || it == index_.end()) return nullptr;
  return cases_[it->second].image_png;
}

std::shared_ptr<const std::vector<std::uint8_t>> SessionBoard::heatmap_png(
    const std::string& sample_id) const {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(sample_id);
  if (!active_ || it == index_.end()) return nullptr;
  return cases_[it->second].heatmap_png;
}

SubmitResult SessionBoard::submit(const std::string& sample_id, Resolution resolution) {
  std::function<void(const Resolution&)> listener;
  SubmitResult result;
  {
    std::lock_guard lock(mutex_);
    if (!active_) return {SubmitStatus::no_session, {}, "no active session"};
    const auto it = index_.find(sample_id);
    if (it == index_.end()) {
      return {SubmitStatus::unknown_case, {}, "no case '" + sample_id + "' in this session"};
    }
    auto& entry = cases_[it->second];
    if (entry.resolution) {
      return {SubmitStatus::already_resolved, {}, "case '" + sample_id + "' is already resolved"};
    }
    if (!resolution.skipped) {
      if (resolution.cells.empty()) {
        return {SubmitStatus::empty_selection, {}, "at least one region must be selected"};
      }
      for (int cell : resolution.cells) {
        if (cell < 0 || cell >= entry.grid.cell_count()) {
          return {SubmitStatus::bad_cell, {},
                  "cell " + std::to_string(cell) + " outside [0, " +
                      std::to_string(entry.grid.cell_count()) + ")"};
        }
      }
    }
    resolution.sample_id = sample_id;
    resolution.timestamp = utc_timestamp();
    entry.resolution = resolution;
    result = {SubmitStatus::accepted, resolution.cells, {}};
    listener = listener_;
  }
  changed_.notify_all();
  if (listener) listener(resolution);
  return result;
}

SubmitResult SessionBoard::submit_selection(const std::string& sample_id, std::vector<int> cells) {
  std::set<int> unique(cells.begin(), cells.end());
  return submit(sample_id, Resolution{sample_id, false, {unique.begin(), unique.end()}, {}, {}});
}

SubmitResult SessionBoard::submit_skip(const std::string& sample_id) {
  return submit(sample_id, Resolution{sample_id, true, {}, {}, {}});
}

std::optional<Resolution> SessionBoard::wait_for(const std::string& sample_id,
                                                 std::optional<Clock::time_point> deadline,
                                                 const std::atomic<bool>* interrupt) {
  std::unique_lock lock(mutex_);
  for (;;) {
    if (!active_) throw FeedbackInterrupted("review session closed");
    const auto it = index_.find(sample_id);
    if (it == index_.end()) throw NotFoundError("no case '" + sample_id + "' on the board");
    if (cases_[it->second].resolution) return cases_[it->second].resolution;
    if (interrupt && interrupt->load()) throw FeedbackInterrupted("review interrupted");
    auto wake = Clock::now() + std::chrono::milliseconds(100);
    if (deadline) {
      if (Clock::now() >= *deadline) return std::nullopt;
      wake = std::min(wake, *deadline);
    }
    changed_.wait_until(lock, wake);
  }
}

void SessionBoard::set_listener(std::function<void(const Resolution&)> listener) {
  std::lock_guard lock(mutex_);
  listener_ = std::move(listener);
}

struct FeedbackServer::Impl {
  httplib::Server server;
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"code", code}, {"message", message}}.dump(), "application/json");
}

void send_submit(httplib::Response& res, const std::string& id, const SubmitResult& r,
                 bool skipped) {
  switch (r.status) {
    case SubmitStatus::accepted: {
      nlohmann::ordered_json body{{"sample_id", id}, {"status", skipped ? "skipped" : "resolved"}};
      if (!skipped) body["cells"] = r.cells;
      res.status = 200;
      res.set_content(body.dump(), "application/json");
      return;
    }
    case SubmitStatus::no_session: return send_error(res, 404, "no_session", r.message);
    case SubmitStatus::unknown_case: return send_error(res, 404, "unknown_case", r.message);
    case SubmitStatus::already_resolved: return send_error(res, 409, "already_resolved", r.message);
    case SubmitStatus::empty_selection: return send_error(res, 422, "empty_selection", r.message);
    case SubmitStatus::bad_cell: return send_error(res, 422, "bad_cell", r.message);
  }
}

}  // namespace

FeedbackServer::FeedbackServer(SessionBoard& board, ServerOptions options)
    : impl_(std::make_unique<Impl>()), board_(board), options_(std::move(options)) {
  auto& srv = impl_->server;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Get("/session", [this](const httplib::Request&, httplib::Response& res) {
    const auto v = board_.view();
    if (!v) return send_error(res, 404, "no_session", "no review session is active");
    nlohmann::ordered_json j{{"session_id", v->session_id},
                             {"epoch", v->epoch},
                             {"total_cases", v->total_cases},
                             {"resolved_count", v->resolved_count},
                             {"pending_case_ids", v->pending_case_ids}};
    res.set_content(j.dump(), "application/json");
  });

  srv.Get("/cases/:id", [this](const httplib::Request& req, httplib::Response& res) {
    const auto& id = req.path_params.at("id");
    if (!board_.active()) return send_error(res, 404, "no_session", "no review session is active");
    const auto body = board_.case_json(id);
    if (!body) return send_error(res, 404, "unknown_case", "no case '" + id + "'");
    res.set_content(*body, "application/json");
  });

  auto serve_png = [this](bool heatmap) {
    return [this, heatmap](const httplib::Request& req, httplib::Response& res) {
      const auto& id = req.path_params.at("id");
      const auto png = heatmap ? board_.heatmap_png(id) : board_.image_png(id);
      if (!png) return send_error(res, 404, "unknown_case", "no case '" + id + "'");
      res.set_content(reinterpret_cast<const char*>(png->data()), png->size(), "image/png");
    };
  };
  srv.Get("/cases/:id/image.png", serve_png(false));
  srv.Get("/cases/:id/heatmap.png", serve_png(true));

  srv.Post("/cases/:id/selection", [this](const httplib::Request& req, httplib::Response& res) {
    const auto& id = req.path_params.at("id");
    std::vector<int> cells;
    try {
      const auto body = nlohmann::json::parse(req.body);
      cells = body.at("cells").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      return send_error(res, 400, "bad_request", std::string("expected {\"cells\":[int]}: ") + e.what());
    }
    send_submit(res, id, board_.submit_selection(id, std::move(cells)), false);
  });

  srv.Post("/cases/:id/skip", [this](const httplib::Request& req, httplib::Response& res) {
    const auto& id = req.path_params.at("id");
    send_submit(res, id, board_.submit_skip(id), true);
  });
}

FeedbackServer::~FeedbackServer() { stop(); }

int FeedbackServer::start() {
  if (thread_.joinable()) return port_;
  auto& srv = impl_->server;
  if (options_.port == 0) {
    port_ = srv.bind_to_any_port(options_.host);
  } else {
    port_ = srv.bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw IoError("cannot bind feedback server to " + options_.host + ":" +
                  std::to_string(options_.port));
  }
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  spdlog::info("feedback server listening on http://{}:{}", options_.host, port_);
  return port_;
}

void FeedbackServer::stop() {
  if (!thread_.joinable()) return;
  impl_->server.stop();
  thread_.join();
}

InteractiveProvider::InteractiveProvider(SessionBoard& board, InteractiveOptions options)
    : board_(board), options_(options) {}

void InteractiveProvider::start(const FeedbackSession& session) {
  deadline_.reset();
  if (options_.timeout_seconds) {
    deadline_ = SessionBoard::Clock::now() +
                std::chrono::duration_cast<SessionBoard::Clock::duration>(
                    std::chrono::duration<double>(*options_.timeout_seconds));
  }
  board_.publish(session);
}

FeedbackDecision InteractiveProvider::resolve(const OutlierCase& outlier) {
  const auto r = board_.wait_for(outlier.record.sample_id, deadline_, options_.interrupt);
  if (!r) throw FeedbackTimeout("review session timed out");
  if (r->skipped) return FeedbackDecision::skip();
  return FeedbackDecision::select(GridSelection(outlier.grid, {r->cells.begin(), r->cells.end()}));
}

void InteractiveProvider::finish(const FeedbackSession&) { board_.close(); }

}  // namespace imil
