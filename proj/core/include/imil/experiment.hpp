#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "imil/config.hpp"
#include "imil/metrics.hpp"
#include "imil/model.hpp"
#include "imil/service.hpp"
#include "imil/session.hpp"
#include "imil/trainer.hpp"

namespace imil {

/// The interactive review was interrupted; state sits in `<out>/resume/`.
class RunInterrupted : public Error {
 public:
  RunInterrupted(const std::string& message, std::filesystem::path resume_dir)
      : Error(message), resume_dir_(std::move(resume_dir)) {}
  const std::filesystem::path& resume_dir() const { return resume_dir_; }

 private:
  std::filesystem::path resume_dir_;
};

struct RunOptions {
  /// Replaces the configured feedback source (tests, embedding).
  FeedbackProvider* provider = nullptr;
  /// Set asynchronously (e.g. from a signal handler) to abort an interactive review.
  const std::atomic<bool>* interrupt = nullptr;
  /// Called with the bound port once the interactive server is up.
  std::function<void(int)> on_server_ready;
  std::function<void(const BatchView&)> batch_observer;
  /// Skip writing artifacts (in-memory runs for benchmarks and tests).
  bool write_artifacts = true;
};

struct RunResult {
  EvalReport report;
  std::vector<EpochRecord> history;
  std::vector<FeedbackSession> sessions;
  TrainingStore final_store;
  AugmentationCounters counters;
  std::filesystem::path out_dir;
};

struct ExperimentData {
  TrainingStore train;
  TrainingStore test;
};

/// Loads or generates the train/test stores described by the config.
ExperimentData load_experiment_data(const ExperimentConfig& config);

std::unique_ptr<Backend> make_backend(const ExperimentConfig& config);

/// Trains, evaluates on the test split and writes report.json, reliability.csv,
/// roc.csv, history.csv, session_*.json, cam/*.png, config.resolved.json,
/// train_store.bin and model.ckpt into the output directory.
/// Throws RunInterrupted if an interactive review is abandoned.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Continues a run from `<out_dir>/resume/`, reusing resolutions already in its session logs.
RunResult resume_experiment(const std::filesystem::path& out_dir, const RunOptions& options = {});

/// True if `<out_dir>/resume/state.json` exists.
bool has_resume_state(const std::filesystem::path& out_dir);

/// Serves the pending review of a paused run until every case is resolved (or
/// `interrupt` fires). Resolutions are written to the run's session log, so a
/// later resume picks them up without asking again. Returns the number resolved.
std::size_t serve_paused_run(const std::filesystem::path& out_dir, const ServerOptions& server,
                             const std::atomic<bool>* interrupt = nullptr,
                             std::function<void(int)> on_ready = {});

/// Re-runs `run_dir`'s resolved config into `out_dir`, answering every review
/// from the session logs recorded in `run_dir`.
RunResult replay_run(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                     const RunOptions& options = {});

struct ComparisonRow {
  std::string run;
  EvalReport report;
};

struct Comparison {
  std::vector<ComparisonRow> rows;

  /// Aligned table; rows after the first carry "value (+delta)" against the first.
  std::string text() const;
  std::string csv() const;
};

/// Reads `report.json` from each directory. Throws NotFoundError naming a
/// directory without one.
Comparison compare_runs(const std::vector<std::filesystem::path>& run_dirs);

/// "0.846" or, with a baseline, "0.846 (+0.042)". Three decimals.
std::string format_metric(double value, const double* baseline = nullptr);

}  // namespace imil
