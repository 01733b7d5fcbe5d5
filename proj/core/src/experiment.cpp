#include "imil/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "imil/checkpoint.hpp"
#include "imil/imil_hook.hpp"
#include "imil/saliency.hpp"

namespace imil {

namespace fs = std::filesystem;

namespace {

constexpr const char* kResolvedConfig = "config.resolved.json";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

GridGeometry grid_for(const ExperimentConfig& config) {
  return {config.imil.grid_size, config.imil.grid_size, config.train.image_size,
          config.train.image_size};
}

std::vector<SessionLog> session_logs_in(const fs::path& dir) {
  std::vector<fs::path> paths;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("session_", 0) == 0 && entry.path().extension() == ".json") {
        paths.push_back(entry.path());
      }
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<SessionLog> logs;
  for (const auto& p : paths) logs.push_back(read_session_log(p));
  return logs;
}

/// Owns whatever the configured feedback source needs to stay alive.
struct FeedbackStack {
  std::unique_ptr<SessionBoard> board;
  std::unique_ptr<FeedbackServer> server;
  std::unique_ptr<FeedbackProvider> provider;
};

FeedbackStack make_feedback(const ExperimentConfig& config, const RunOptions& options) {
  FeedbackStack stack;
  const auto grid = grid_for(config);
  switch (config.feedback.kind) {
    case FeedbackSourceKind::oracle:
      stack.provider = std::make_unique<OracleProvider>(
          OracleSpec{*config.oracle_region(), config.feedback.oracle_policy}, grid);
      break;
    case FeedbackSourceKind::random: {
      auto cells = static_cast<std::size_t>(config.feedback.random_cells);
      if (cells == 0) {
        cells = oracle_cells(OracleSpec{*config.oracle_region(), config.feedback.oracle_policy}, grid)
                    .size();
      }
      stack.provider = std::make_unique<RandomProvider>(cells, config.train.seed);
      break;
    }
    case FeedbackSourceKind::scripted:
      stack.provider = std::make_unique<ScriptedProvider>(
          config.feedback.scripted_path, ScriptedOptions{config.feedback.scripted_strict});
      break;
    case FeedbackSourceKind::interactive: {
      stack.board = std::make_unique<SessionBoard>();
      stack.server = std::make_unique<FeedbackServer>(
          *stack.board, ServerOptions{config.feedback.host, config.feedback.port});
      const int port = stack.server->start();
      if (options.on_server_ready) options.on_server_ready(port);
      stack.provider = std::make_unique<InteractiveProvider>(
          *stack.board, InteractiveOptions{config.imil.session_timeout_seconds, options.interrupt});
      break;
    }
  }
  return stack;
}

void check_cam_samples(const ExperimentConfig& config, const ExperimentData& data) {
  std::vector<std::string> issues;
  for (const auto& id : config.eval.cam_samples) {
    if (!data.train.contains(id) && !data.test.contains(id)) {
      issues.push_back("eval.cam_samples: unknown sample id '" + id + "'");
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

void write_cams(const ExperimentConfig& config, const Backend& backend, const TrainingStore& train,
                const TrainingStore& test, const fs::path& dir) {
  if (config.eval.cam_samples.empty()) return;
  if (!backend.has_saliency_tap()) {
    spdlog::warn("backend {} has no saliency tap; skipping CAM overlays", backend.architecture());
    return;
  }
  fs::create_directories(dir);
  for (const auto& id : config.eval.cam_samples) {
    const auto& sample = train.contains(id) ? train.at(id) : test.at(id);
    const auto probs = backend.probabilities(std::span<const Image>(&sample.pixels, 1)).front();
    const int cls = make_prediction(id, sample.label, probs).predicted_label;
    const auto heatmap = grad_cam(backend, sample.pixels, cls);
    render_overlay(sample.pixels, heatmap, dir / overlay_filename(id, config.train.epochs, cls));
  }
}

struct ResumePoint {
  int epoch = 0;
  std::vector<EpochRecord> history;
  TrainingStore store;
  fs::path checkpoint;
};

RunResult execute(const ExperimentConfig& config, const RunOptions& options,
                  const ResumePoint* resume) {
  config.validate();
  const fs::path out = config.output_dir();
  const bool write = options.write_artifacts;
  if (write) {
    fs::create_directories(out);
    write_text(out / kResolvedConfig, config_to_json(config).dump(2) + "\n");
  }

  auto data = load_experiment_data(config);
  check_cam_samples(config, data);
  auto backend = make_backend(config);

  RunResult result;
  result.out_dir = out;
  TrainOptions train_options;
  train_options.batch_observer = options.batch_observer;
  train_options.counters = &result.counters;
  train_options.epoch_observer = [&](const EpochRecord& r) { result.history.push_back(r); };
  if (resume) {
    load_checkpoint(resume->checkpoint, *backend);
    data.train = resume->store;
    result.history = resume->history;
    train_options.first_epoch = resume->epoch;
    train_options.resume_at_epoch_end = true;
  }

  FeedbackStack feedback;
  std::unique_ptr<ImilHook> hook;
  std::vector<EpochHook*> hooks;
  int pending_epoch = 0;
  if (config.train.augmentation == AugmentationMode::imil) {
    FeedbackProvider* provider = options.provider;
    if (!provider) {
      feedback = make_feedback(config, options);
      provider = feedback.provider.get();
    }
    ImilHookOptions hook_options;
    hook_options.run_name = config.run_name;
    if (write) hook_options.log_dir = out;
    if (resume) hook_options.prior = session_logs_in(out);
    hook_options.on_session_built = [&](const FeedbackSession& s) { pending_epoch = s.epoch; };
    hook = std::make_unique<ImilHook>(config.imil, *provider, std::move(hook_options));
    hooks.push_back(hook.get());
  }

  try {
    train(*backend, data.train, config.train, hooks, train_options);
  } catch (const FeedbackInterrupted& e) {
    if (feedback.server) feedback.server->stop();
    if (!write) throw;
    const fs::path dir = out / "resume";
    fs::create_directories(dir);
    save_checkpoint(dir / "model.ckpt", *backend,
                    CheckpointManifest{kCheckpointFormatVersion, backend->architecture(),
                                       config.train.seed, pending_epoch});
    save_store(data.train, dir / "store.bin");
    write_history_csv(dir / "history.csv", result.history);
    write_text(dir / "state.json",
               nlohmann::ordered_json{{"run", config.run_name}, {"epoch", pending_epoch}}.dump(2) +
                   "\n");
    throw RunInterrupted(std::string(e.what()) + "; state saved for resume at epoch " +
                             std::to_string(pending_epoch),
                         dir);
  }
  if (feedback.server) feedback.server->stop();

  const auto records =
      predict_all(*backend, data.test, static_cast<std::size_t>(config.train.batch_size));
  result.report = evaluate(records, config.eval.ece_bins);
  if (hook) result.sessions = hook->sessions();

  if (write) {
    write_report(result.report, out);
    write_history_csv(out / "history.csv", result.history);
    save_store(data.train, out / "train_store.bin");
    save_checkpoint(out / "model.ckpt", *backend,
                    CheckpointManifest{kCheckpointFormatVersion, backend->architecture(),
                                       config.train.seed, config.train.epochs});
    write_cams(config, *backend, data.train, data.test, out / "cam");
    if (resume) fs::remove_all(out / "resume");
  }
  result.final_store = std::move(data.train);
  spdlog::info("{}: accuracy {:.3f}  auroc {:.3f}  ece {:.3f}", config.run_name,
               result.report.accuracy, result.report.auroc, result.report.ece);
  return result;
}

ExperimentConfig resolved_config(const fs::path& run_dir) {
  const auto path = run_dir / kResolvedConfig;
  if (!fs::exists(path)) throw NotFoundError("no " + std::string(kResolvedConfig) + " in " + run_dir.string());
  return load_config(path);
}

int resume_epoch(const fs::path& out_dir) {
  const auto state = read_json(out_dir / "resume" / "state.json");
  return state.at("epoch").get<int>();
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  if (config.data_source == DataSourceKind::synthetic) {
    auto spec = config.synthetic;
    spec.image_size = config.train.image_size;
    auto ds = generate_synthetic(spec);
    return {std::move(ds.train), std::move(ds.test)};
  }
  const auto& m = config.manifest;
  const LoadOptions load{config.train.image_size, m.channels};
  const auto root = [](const fs::path& manifest, const fs::path& image_root) {
    return image_root.empty() ? manifest.parent_path() : image_root;
  };
  auto all = load_manifest(m.manifest, root(m.manifest, m.image_root), load);
  if (!m.test_manifest.empty()) {
    auto test = load_manifest(m.test_manifest, root(m.test_manifest, m.image_root), load);
    return {std::move(all), TrainingStore(SplitTag::test, test.snapshot())};
  }
  auto [train, test] = split_dataset(all, m.train_fraction, config.synthetic.seed);
  return {std::move(train), std::move(test)};
}

std::unique_ptr<Backend> make_backend(const ExperimentConfig& config) {
  const int channels = config.data_source == DataSourceKind::manifest ? config.manifest.channels : 1;
  std::unique_ptr<Backend> backend;
  if (config.backend == BackendKind::linear) {
    backend = std::make_unique<LinearBackend>(channels, config.train.image_size,
                                              config.train.image_size, config.train.seed);
  } else {
    backend = std::make_unique<ReferenceCnn>(channels, config.train.image_size, config.train.seed);
  }
  backend->set_optimizer(config.train.optimizer);
  return backend;
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return execute(config, options, nullptr);
}

bool has_resume_state(const fs::path& out_dir) {
  return fs::exists(out_dir / "resume" / "state.json");
}

RunResult resume_experiment(const fs::path& out_dir, const RunOptions& options) {
  if (!has_resume_state(out_dir)) {
    throw NotFoundError("no paused run to resume in " + out_dir.string());
  }
  auto config = resolved_config(out_dir);
  config.out_dir = out_dir;
  ResumePoint point;
  point.epoch = resume_epoch(out_dir);
  point.checkpoint = out_dir / "resume" / "model.ckpt";
  point.store = load_store(out_dir / "resume" / "store.bin");
  point.history = read_history_csv(out_dir / "resume" / "history.csv");
  spdlog::info("resuming {} at the end of epoch {}", config.run_name, point.epoch);
  return execute(config, options, &point);
}

std::size_t serve_paused_run(const fs::path& out_dir, const ServerOptions& server_options,
                             const std::atomic<bool>* interrupt, std::function<void(int)> on_ready) {
  if (!has_resume_state(out_dir)) {
    throw NotFoundError("no paused run in " + out_dir.string());
  }
  const auto config = resolved_config(out_dir);
  const int epoch = resume_epoch(out_dir);
  auto backend = make_backend(config);
  load_checkpoint(out_dir / "resume" / "model.ckpt", *backend);
  const auto store = load_store(out_dir / "resume" / "store.bin");

  const auto records = predict_all(*backend, store, static_cast<std::size_t>(config.train.batch_size));
  const auto outliers = select_outliers(records, static_cast<std::size_t>(config.imil.num_outliers));
  if (outliers.empty()) return 0;
  auto session = build_session(outliers, store, *backend, config.imil.grid_size, epoch, config.run_name);
  const auto log_path = out_dir / session_log_filename(config.run_name, epoch);
  if (fs::exists(log_path)) session.resolutions = read_session_log(log_path).resolutions;

  std::mutex log_mutex;
  std::size_t resolved = 0;
  SessionBoard board;
  board.set_listener([&](const Resolution& r) {
    std::lock_guard lock(log_mutex);
    session.resolutions.push_back(r);
    write_session_log(session, log_path);
    ++resolved;
  });
  board.publish(session);
  FeedbackServer server(board, server_options);
  const int port = server.start();
  if (on_ready) on_ready(port);
  try {
    for (const auto& c : session.cases) board.wait_for(c.record.sample_id, std::nullopt, interrupt);
  } catch (const FeedbackInterrupted&) {
    spdlog::warn("review interrupted; {} case(s) recorded", resolved);
  }
  server.stop();
  board.close();
  return resolved;
}

RunResult replay_run(const fs::path& run_dir, const fs::path& out_dir, const RunOptions& options) {
  auto config = resolved_config(run_dir);
  config.out_dir = out_dir;
  if (config.train.augmentation == AugmentationMode::imil) {
    config.feedback.kind = FeedbackSourceKind::scripted;
    config.feedback.scripted_path = fs::absolute(run_dir);
    config.feedback.scripted_strict = true;
  }
  return run_experiment(config, options);
}

std::string format_metric(double value, const double* baseline) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  std::string out = buf;
  if (baseline) {
    double delta = value - *baseline;
    if (std::fabs(delta) < 5e-4) delta = 0.0;
    std::snprintf(buf, sizeof(buf), " (%c%.3f)", delta < 0 ? '-' : '+', std::fabs(delta));
    out += buf;
  }
  return out;
}

Comparison compare_runs(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw ValidationError("compare needs at least one run directory");
  Comparison c;
  for (const auto& dir : run_dirs) {
    const auto path = dir / "report.json";
    if (!fs::exists(path)) throw NotFoundError("no report.json in " + dir.string());
    auto name = dir.filename().string();
    if (name.empty()) name = dir.parent_path().filename().string();
    c.rows.push_back({name, read_report(path)});
  }
  return c;
}

namespace {

std::vector<std::vector<std::string>> comparison_cells(const Comparison& c) {
  std::vector<std::vector<std::string>> cells;
  const auto& base = c.rows.front().report;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    const auto& r = c.rows[i].report;
    const bool delta = i > 0;
    cells.push_back({c.rows[i].run, format_metric(r.accuracy, delta ? &base.accuracy : nullptr),
                     format_metric(r.auroc, delta ? &base.auroc : nullptr),
                     format_metric(r.ece, delta ? &base.ece : nullptr)});
  }
  return cells;
}

}  // namespace

std::string Comparison::text() const {
  std::vector<std::vector<std::string>> table{{"run", "accuracy", "auroc", "ece"}};
  for (auto& row : comparison_cells(*this)) table.push_back(std::move(row));
  std::vector<std::size_t> width(4, 0);
  for (const auto& row : table) {
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  }
  std::string out;
  for (const auto& row : table) {
    std::string line;
    for (std::size_t k = 0; k < row.size(); ++k) {
      line += row[k];
      if (k + 1 < row.size()) line += std::string(width[k] - row[k].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

std::string Comparison::csv() const {
  const bool deltas = rows.size() > 1;
  std::string out = "run,accuracy,auroc,ece";
  if (deltas) out += ",accuracy_delta,auroc_delta,ece_delta";
  out += "\n";
  const auto& base = rows.front().report;
  auto delta = [](double v, double b) {
    const auto s = format_metric(v, &b);
    return s.substr(s.find('(') + 1, s.size() - s.find('(') - 2);
  };
  for (const auto& row : rows) {
    const auto& r = row.report;
    out += row.run + "," + format_metric(r.accuracy) + "," + format_metric(r.auroc) + "," +
           format_metric(r.ece);
    if (deltas) {
      out += "," + delta(r.accuracy, base.accuracy) + "," + delta(r.auroc, base.auroc) + "," +
             delta(r.ece, base.ece);
    }
    out += "\n";
  }
  return out;
}

}  // namespace imil
