#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "imil/config.hpp"
#include "imil/dataset.hpp"
#include "imil/experiment.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfigError = 2, kRuntimeError = 3, kInterrupted = 4 };

std::atomic<bool> g_interrupt{false};

extern "C" void on_signal(int) { g_interrupt.store(true); }

struct SignalGuard {
  SignalGuard() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
  }
  ~SignalGuard() {
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);
  }
};

void announce_server(int port) {
  std::printf("feedback server: http://127.0.0.1:%d/session (Ctrl-C to pause the run)\n", port);
  std::fflush(stdout);
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool resume = false;
  std::optional<int> port;
  std::string feedback;
};

int cmd_run(const RunArgs& a) {
  if (a.resume) {
    fs::path out = a.out;
    if (out.empty()) {
      if (a.config.empty()) {
        std::fprintf(stderr, "error: --resume needs --out DIR or --config\n");
        return kConfigError;
      }
      out = imil::load_config(a.config).output_dir();
    }
    SignalGuard guard;
    imil::RunOptions options;
    options.interrupt = &g_interrupt;
    options.on_server_ready = announce_server;
    const auto result = imil::resume_experiment(out, options);
    std::printf("%s\n", imil::to_json(result.report).dump(2).c_str());
    return kOk;
  }
  if (a.config.empty()) {
    std::fprintf(stderr, "error: run needs --config PATH\n");
    return kConfigError;
  }
  imil::ExperimentConfig config;
  try {
    config = imil::load_config(a.config);
    if (a.seed) {
      config.train.seed = *a.seed;
      config.synthetic.seed = *a.seed;
    }
    if (!a.out.empty()) config.out_dir = a.out;
    if (a.port) config.feedback.port = *a.port;
    if (!a.feedback.empty()) imil::apply_feedback_flag(config, a.feedback);
    config.validate();
  } catch (const imil::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  SignalGuard guard;
  imil::RunOptions options;
  options.interrupt = &g_interrupt;
  options.on_server_ready = announce_server;
  const auto result = imil::run_experiment(config, options);
  std::printf("%s\n", imil::to_json(result.report).dump(2).c_str());
  return kOk;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& csv_path) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const auto table = imil::compare_runs(paths);
  std::printf("%s", table.text().c_str());
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw imil::IoError("cannot write " + csv_path);
    out << table.csv();
  }
  return kOk;
}

int cmd_serve(const std::string& out, const std::string& host, int port) {
  SignalGuard guard;
  const auto n = imil::serve_paused_run(out, {host, port}, &g_interrupt, announce_server);
  std::printf("%zu case(s) resolved; continue with: imil run --resume --out %s\n", n, out.c_str());
  return kOk;
}

int cmd_synth(imil::SyntheticSpec spec, const std::string& out, bool signal_set, bool spurious_set) {
  const imil::SyntheticSpec defaults;
  if (!signal_set) spec.signal_region = defaults.signal_region.scaled(defaults.image_size, spec.image_size);
  if (!spurious_set) {
    spec.spurious_region = defaults.spurious_region.scaled(defaults.image_size, spec.image_size);
  }
  spec.validate();
  const auto ds = imil::generate_synthetic(spec);
  imil::export_manifest(ds.train, fs::path(out) / "train");
  imil::export_manifest(ds.test, fs::path(out) / "test");
  std::printf("wrote %zu train and %zu test samples to %s\n", ds.train.size(), ds.test.size(),
              out.c_str());
  return kOk;
}

int cmd_replay(const std::string& run_dir, const std::string& out) {
  const auto result = imil::replay_run(run_dir, out);
  std::printf("%s\n", imil::to_json(result.report).dump(2).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive mid-training review of confident mispredictions"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Train and evaluate one configured run");
  run_cmd->add_option("--config", run.config, "INI config or config.resolved.json");
  run_cmd->add_option("--seed", run.seed, "Override the run and data seed");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_flag("--resume", run.resume, "Continue a paused run in --out");
  run_cmd->add_option("--port", run.port, "Port for interactive feedback (0 picks one)");
  run_cmd->add_option("--feedback", run.feedback, "interactive, oracle, random or scripted:PATH");

  std::vector<std::string> compare_dirs;
  std::string compare_csv;
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate report.json of several runs");
  compare_cmd->add_option("runs", compare_dirs, "Run directories; the first is the reference")
      ->required();
  compare_cmd->add_option("--csv", compare_csv, "Also write the table as CSV");

  std::string serve_out;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the pending review of a paused run");
  serve_cmd->add_option("--out", serve_out, "Paused run directory")->required();
  serve_cmd->add_option("--host", serve_host, "Bind address");
  serve_cmd->add_option("--port", serve_port, "Port (0 picks one)");

  imil::SyntheticSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write the spurious-marker synthetic dataset as PNGs");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--n-per-class", synth.n_per_class);
  synth_cmd->add_option("--test-n-per-class", synth.test_n_per_class);
  synth_cmd->add_option("--image-size", synth.image_size);
  synth_cmd->add_option("--train-correlation", synth.spurious_train_correlation);
  synth_cmd->add_option("--test-correlation", synth.spurious_test_correlation);
  synth_cmd->add_option("--noise", synth.noise_std);
  std::vector<int> signal_region;
  std::vector<int> spurious_region;
  synth_cmd->add_option("--signal-region", signal_region, "row0 col0 row1 col1 (default scales with size)")
      ->expected(4);
  synth_cmd->add_option("--spurious-region", spurious_region, "row0 col0 row1 col1")->expected(4);

  std::string replay_run;
  std::string replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a finished run from its session logs");
  replay_cmd->add_option("--run", replay_run, "Recorded run directory")->required();
  replay_cmd->add_option("--out", replay_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("imil"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*compare_cmd) return cmd_compare(compare_dirs, compare_csv);
    if (*serve_cmd) return cmd_serve(serve_out, serve_host, serve_port);
    if (*synth_cmd) {
      auto rect = [](const std::vector<int>& v) { return imil::Rect{v[0], v[1], v[2], v[3]}; };
      if (!signal_region.empty()) synth.signal_region = rect(signal_region);
      if (!spurious_region.empty()) synth.spurious_region = rect(spurious_region);
      return cmd_synth(synth, synth_out, !signal_region.empty(), !spurious_region.empty());
    }
    if (*replay_cmd) return cmd_replay(replay_run, replay_out);
  } catch (const imil::RunInterrupted& e) {
    std::fprintf(stderr, "interrupted: %s\n", e.what());
    return kInterrupted;
  } catch (const imil::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kOk;
}
