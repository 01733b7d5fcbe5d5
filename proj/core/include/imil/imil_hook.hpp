#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "imil/feedback.hpp"
#include "imil/session.hpp"
#include "imil/trainer.hpp"

namespace imil {

enum class FeedbackSourceKind { interactive, scripted, oracle, random };

std::string_view to_string(FeedbackSourceKind kind);

struct ImilConfig {
  int num_outliers = 20;
  /// Epochs (1-based) after which a feedback session runs.
  std::vector<int> epochs{70};
  int grid_size = 4;
  FeedbackSourceKind feedback_source = FeedbackSourceKind::oracle;
  std::optional<double> session_timeout_seconds;

  void validate(int total_epochs) const;
};

struct ImilHookOptions {
  std::string run_name = "run";
  /// Where `session_{run}_{epoch}.json` logs go; empty disables persistence.
  std::filesystem::path log_dir;
  /// Resolutions already collected before an interruption, keyed by log epoch.
  std::vector<SessionLog> prior;
  /// Called once a session is built, before the provider sees it.
  std::function<void(const FeedbackSession&)> on_session_built;
};

/// Mid-training review of confident mispredictions. Inert except at the
/// configured epochs, where it predicts over the training store, picks the
/// outliers, collects one decision per case, then blackout-replaces every
/// selected sample (skips leave the sample untouched). Never draws from the
/// training random streams.
class ImilHook final : public EpochHook {
 public:
  ImilHook(ImilConfig config, FeedbackProvider& provider, ImilHookOptions options = {});

  HookSignal on_epoch_end(EpochContext& context) override;
  void resolve(EpochContext& context) override;

  const std::vector<FeedbackSession>& sessions() const { return sessions_; }
  const ImilConfig& config() const { return config_; }

 private:
  void persist(const FeedbackSession& session) const;
  const Resolution* prior_resolution(int epoch, std::string_view sample_id) const;

  ImilConfig config_;
  FeedbackProvider& provider_;
  ImilHookOptions options_;
  std::optional<FeedbackSession> pending_;
  std::vector<FeedbackSession> sessions_;
};

}  // namespace imil
