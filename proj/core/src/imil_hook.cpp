#include "imil/imil_hook.hpp"

#include <algorithm>
#include <chrono>

#include <spdlog/spdlog.h>

#include "imil/errors.hpp"

namespace imil {

std::string_view to_string(FeedbackSourceKind kind) {
  switch (kind) {
    case FeedbackSourceKind::interactive: return "interactive";
    case FeedbackSourceKind::scripted: return "scripted";
    case FeedbackSourceKind::oracle: return "oracle";
    case FeedbackSourceKind::random: return "random";
  }
  return "oracle";
}

void ImilConfig::validate(int total_epochs) const {
  if (num_outliers < 1) throw ValidationError("imil.num_outliers must be >= 1");
  if (grid_size < 2) throw ValidationError("imil.grid_size must be >= 2");
  if (epochs.empty()) throw ValidationError("imil.epoch needs at least one epoch");
  for (int e : epochs) {
    if (e < 1 || e > total_epochs) {
      throw ValidationError("imil.epoch " + std::to_string(e) + " outside [1, " +
                            std::to_string(total_epochs) + "]");
    }
  }
  if (session_timeout_seconds && !(*session_timeout_seconds > 0.0)) {
    throw ValidationError("imil.session_timeout must be positive when set");
  }
}

ImilHook::ImilHook(ImilConfig config, FeedbackProvider& provider, ImilHookOptions options)
    : config_(std::move(config)), provider_(provider), options_(std::move(options)) {
  if (config_.num_outliers < 1) throw ValidationError("imil.num_outliers must be >= 1");
  if (config_.grid_size < 2) throw ValidationError("imil.grid_size must be >= 2");
}

HookSignal ImilHook::on_epoch_end(EpochContext& context) {
  if (std::find(config_.epochs.begin(), config_.epochs.end(), context.epoch) ==
      config_.epochs.end()) {
    return HookSignal::proceed;
  }
  const auto records = predict_all(context.backend, context.store,
                                   static_cast<std::size_t>(context.config.batch_size));
  const auto outliers =
      select_outliers(records, static_cast<std::size_t>(config_.num_outliers));
  spdlog::info("feedback session at epoch {}: {} mispredictions selected", context.epoch,
               outliers.size());
  if (outliers.empty()) {
    FeedbackSession empty;
    empty.run = options_.run_name;
    empty.epoch = context.epoch;
    empty.session_id = empty.run + "-epoch" + std::to_string(context.epoch);
    persist(empty);
    sessions_.push_back(std::move(empty));
    return HookSignal::proceed;
  }
  pending_ = build_session(outliers, context.store, context.backend, config_.grid_size,
                           context.epoch, options_.run_name);
  if (options_.on_session_built) options_.on_session_built(*pending_);
  persist(*pending_);
  return HookSignal::pause_for_feedback;
}

const Resolution* ImilHook::prior_resolution(int epoch, std::string_view sample_id) const {
  for (const auto& log : options_.prior) {
    if (log.epoch == epoch) {
      if (const auto* r = log.resolution_for(sample_id)) return r;
    }
  }
  return nullptr;
}

void ImilHook::resolve(EpochContext& context) {
  if (!pending_) return;
  FeedbackSession& session = *pending_;
  using Clock = std::chrono::steady_clock;
  std::optional<Clock::time_point> deadline;
  if (config_.session_timeout_seconds) {
    deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double>(*config_.session_timeout_seconds));
  }

  std::vector<FeedbackDecision> decisions;
  decisions.reserve(session.cases.size());
  bool timed_out = false;
  try {
    FeedbackSession preview = session;
    for (const auto& outlier : session.cases) {
      if (const auto* prior = prior_resolution(session.epoch, outlier.record.sample_id)) {
        preview.resolutions.push_back(*prior);
      }
    }
    provider_.start(preview);
    for (auto& outlier : session.cases) {
      const auto& id = outlier.record.sample_id;
      Resolution resolution{id, false, {}, utc_timestamp(), {}};
      FeedbackDecision decision;
      if (const auto* prior = prior_resolution(session.epoch, id)) {
        resolution = *prior;
        decision = prior->skipped ? FeedbackDecision::skip()
                                  : FeedbackDecision::select(GridSelection(
                                        outlier.grid, {prior->cells.begin(), prior->cells.end()}));
      } else {
        if (!timed_out && deadline && Clock::now() >= *deadline) timed_out = true;
        if (!timed_out) {
          try {
            decision = provider_.resolve(outlier);
          } catch (const FeedbackTimeout& e) {
            spdlog::warn("feedback timed out ({}); skipping the remaining cases", e.what());
            timed_out = true;
          }
        }
        if (timed_out) {
          decision = FeedbackDecision::skip();
          resolution.note = "timeout";
        }
      }
      if (decision.selection && !(decision.selection->geometry() == outlier.grid)) {
        throw ValidationError("provider returned a selection for the wrong grid on '" + id + "'");
      }
      resolution.skipped = decision.is_skip();
      resolution.cells = decision.is_skip() ? std::vector<int>{} : decision.selection->sorted_cells();
      session.resolutions.push_back(std::move(resolution));
      decisions.push_back(std::move(decision));
      persist(session);
    }
    provider_.finish(session);
  } catch (...) {
    persist(session);
    throw;
  }

  std::size_t replaced = 0;
  for (std::size_t i = 0; i < session.cases.size(); ++i) {
    auto& outlier = session.cases[i];
    if (decisions[i].is_skip()) {
      skip_case(outlier);
    } else {
      apply_feedback(context.store, outlier, *decisions[i].selection);
      ++replaced;
    }
  }
  persist(session);
  spdlog::info("feedback session at epoch {} complete: {} replaced, {} skipped", session.epoch,
               replaced, session.cases.size() - replaced);
  sessions_.push_back(std::move(session));
  pending_.reset();
}

void ImilHook::persist(const FeedbackSession& session) const {
  if (options_.log_dir.empty()) return;
  write_session_log(session, options_.log_dir / session_log_filename(session.run, session.epoch));
}

}  // namespace imil
