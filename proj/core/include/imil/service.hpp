#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "imil/feedback.hpp"
#include "imil/session.hpp"

namespace imil {

struct SessionView {
  std::string session_id;
  int epoch = 0;
  std::size_t total_cases = 0;
  std::size_t resolved_count = 0;
  std::vector<std::string> pending_case_ids;  ///< rank order
};

enum class SubmitStatus { accepted, no_session, unknown_case, already_resolved, empty_selection, bad_cell };

struct SubmitResult {
  SubmitStatus status = SubmitStatus::accepted;
  std::vector<int> cells;  ///< echoed, ascending
  std::string message;
};

/// Thread-safe holder of the single active review session. Case payloads are
/// rendered once at publish time and never change while pending; every
/// resolution goes through one mutex, so each case is resolved at most once.
class SessionBoard {
 public:
  using Clock = std::chrono::steady_clock;

  /// Replaces any active session. Resolutions already present in
  /// `session.resolutions` are carried over as resolved.
  void publish(const FeedbackSession& session);
  void close();
  bool active() const;

  std::optional<SessionView> view() const;
  /// JSON body for GET /cases/{id}; nullopt if unknown or no session.
  std::optional<std::string> case_json(const std::string& sample_id) const;
  std::shared_ptr<const std::vector<std::uint8_t>> image_png(const std::string& sample_id) const;
  std::shared_ptr<const std::vector<std::uint8_t>> heatmap_png(const std::string& sample_id) const;

  SubmitResult submit_selection(const std::string& sample_id, std::vector<int> cells);
  SubmitResult submit_skip(const std::string& sample_id);

  /// Blocks until `sample_id` is resolved. Returns nullopt at the deadline;
  /// throws FeedbackInterrupted if the board closes or `interrupt` becomes true.
  std::optional<Resolution> wait_for(const std::string& sample_id,
                                     std::optional<Clock::time_point> deadline,
                                     const std::atomic<bool>* interrupt = nullptr);

  /// Invoked (outside the lock) after each accepted resolution.
  void set_listener(std::function<void(const Resolution&)> listener);

 private:
  struct CaseEntry {
    int rank = 0;
    std::string sample_id;
    PredictionRecord record;
    GridGeometry grid;
    std::shared_ptr<const std::vector<std::uint8_t>> image_png;
    std::shared_ptr<const std::vector<std::uint8_t>> heatmap_png;
    std::optional<Resolution> resolution;
  };

  std::string render_case_json(const CaseEntry& entry) const;
  SubmitResult submit(const std::string& sample_id, Resolution resolution);

  mutable std::mutex mutex_;
  std::condition_variable changed_;
  bool active_ = false;
  std::string session_id_;
  int epoch_ = 0;
  std::vector<CaseEntry> cases_;
  std::map<std::string, std::size_t> index_;
  std::function<void(const Resolution&)> listener_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  ///< 0 picks a free port
};

/// HTTP/1.1 JSON front end for a SessionBoard:
///   GET  /session
///   GET  /cases/{id}            (+ /cases/{id}/image.png, /cases/{id}/heatmap.png)
///   POST /cases/{id}/selection  {"cells":[...]}
///   POST /cases/{id}/skip
/// Errors carry {"code","message"}. CORS is open for a local browser UI.
class FeedbackServer {
 public:
  FeedbackServer(SessionBoard& board, ServerOptions options = {});
  ~FeedbackServer();
  FeedbackServer(const FeedbackServer&) = delete;
  FeedbackServer& operator=(const FeedbackServer&) = delete;

  /// Binds and starts serving on a background thread; returns the bound port.
  int start();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SessionBoard& board_;
  ServerOptions options_;
  int port_ = 0;
  std::thread thread_;
};

struct InteractiveOptions {
  std::optional<double> timeout_seconds;
  const std::atomic<bool>* interrupt = nullptr;
};

/// Publishes each session on a board and waits for a human to resolve it.
class InteractiveProvider final : public FeedbackProvider {
 public:
  InteractiveProvider(SessionBoard& board, InteractiveOptions options = {});

  void start(const FeedbackSession& session) override;
  FeedbackDecision resolve(const OutlierCase& outlier) override;
  void finish(const FeedbackSession& session) override;

 private:
  SessionBoard& board_;
  InteractiveOptions options_;
  std::optional<SessionBoard::Clock::time_point> deadline_;
};

}  // namespace imil
