#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imil/dataset.hpp"
#include "imil/errors.hpp"
#include "imil/feedback.hpp"
#include "imil/imil_hook.hpp"
#include "imil/trainer.hpp"

namespace imil {

/// Invalid configuration. `issues` holds one "section.key: message" entry per problem.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

enum class DataSourceKind { synthetic, manifest };
enum class BackendKind { refcnn, linear };

struct ManifestSource {
  std::filesystem::path manifest;
  std::filesystem::path image_root;  ///< defaults to the manifest's directory
  /// Optional separate test manifest; otherwise a stratified train/test split.
  std::filesystem::path test_manifest;
  double train_fraction = 0.8;
  int channels = 1;
};

struct FeedbackConfig {
  FeedbackSourceKind kind = FeedbackSourceKind::oracle;
  std::filesystem::path scripted_path;
  bool scripted_strict = false;
  OraclePolicy oracle_policy = OraclePolicy::exact_cover;
  /// Oracle target; defaults to the synthetic signal region.
  std::optional<Rect> oracle_region;
  /// Cells per case for the random control; 0 means "as many as the oracle would pick".
  int random_cells = 0;
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct EvalConfig {
  int ece_bins = 15;
  /// Sample ids (train or test) that get Grad-CAM overlays after training.
  std::vector<std::string> cam_samples;
};

struct ExperimentConfig {
  std::string run_name = "run";
  std::filesystem::path out_dir;  ///< empty means runs/<run_name>
  BackendKind backend = BackendKind::refcnn;
  TrainRunConfig train;
  ImilConfig imil;
  FeedbackConfig feedback;
  DataSourceKind data_source = DataSourceKind::synthetic;
  ManifestSource manifest;
  SyntheticSpec synthetic;
  EvalConfig eval;

  /// Throws ConfigError listing every problem found.
  void validate() const;
  std::filesystem::path output_dir() const;
  /// Oracle region to use (explicit or the synthetic signal region).
  std::optional<Rect> oracle_region() const;
};

using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

/// INI-style text: `[section]` headers, `key = value`, `#`/`;` comments.
ConfigSections parse_ini(const std::string& text);

/// Builds a config from sections. Relative paths resolve against `base_dir`.
ExperimentConfig config_from_sections(const ConfigSections& sections,
                                      const std::filesystem::path& base_dir = {});

/// Loads an INI file or a `config.resolved.json`.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field materialized, same key space as the INI sections.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Parses `interactive`, `oracle`, `random` or `scripted:PATH`.
void apply_feedback_flag(ExperimentConfig& config, const std::string& flag);

}  // namespace imil
