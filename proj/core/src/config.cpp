#include "imil/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace imil {

namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string_view to_string(OraclePolicy p) {
  return p == OraclePolicy::minimal_cover ? "minimal_cover" : "exact_cover";
}

std::string_view to_string(BackendKind b) { return b == BackendKind::linear ? "linear" : "refcnn"; }

std::string_view to_string(DataSourceKind d) {
  return d == DataSourceKind::manifest ? "manifest" : "synthetic";
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

/// Typed, consuming view over parsed sections that records every problem.
class Reader {
 public:
  Reader(const ConfigSections& sections, fs::path base_dir)
      : sections_(sections), base_dir_(std::move(base_dir)) {}

  bool has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) != 0;
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    const auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  void str(const std::string& section, const std::string& key, std::string& out) {
    if (auto v = raw(section, key)) out = *v;
  }

  void path(const std::string& section, const std::string& key, fs::path& out) {
    if (auto v = raw(section, key)) {
      if (v->empty()) {
        out.clear();
      } else {
        fs::path p(*v);
        out = p.is_relative() && !base_dir_.empty() ? base_dir_ / p : p;
      }
    }
  }

  template <typename T>
  void integer(const std::string& section, const std::string& key, T& out) {
    const auto v = raw(section, key);
    if (!v) return;
    T parsed{};
    const auto* end = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(v->data(), end, parsed);
    if (ec != std::errc{} || ptr != end) {
      fail(section, key, "expected an integer, got '" + *v + "'");
      return;
    }
    out = parsed;
  }

  void real(const std::string& section, const std::string& key, double& out) {
    const auto v = raw(section, key);
    if (!v) return;
    char* end = nullptr;
    const double parsed = std::strtod(v->c_str(), &end);
    if (v->empty() || end != v->c_str() + v->size()) {
      fail(section, key, "expected a number, got '" + *v + "'");
      return;
    }
    out = parsed;
  }

  void optional_real(const std::string& section, const std::string& key,
                     std::optional<double>& out) {
    if (!has(section, key)) {
      raw(section, key);
      return;
    }
    const auto v = raw(section, key);
    if (v->empty() || *v == "none") {
      out.reset();
      return;
    }
    double d = 0.0;
    real(section, key, d);
    out = d;
  }

  void boolean(const std::string& section, const std::string& key, bool& out) {
    const auto v = raw(section, key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "no" || *v == "off") {
      out = false;
    } else {
      fail(section, key, "expected true or false, got '" + *v + "'");
    }
  }

  bool rect(const std::string& section, const std::string& key, Rect& out) {
    const auto v = raw(section, key);
    if (!v) return false;
    const auto parts = split_list(*v);
    std::vector<int> nums;
    for (const auto& p : parts) {
      int n = 0;
      const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), n);
      if (ec != std::errc{} || ptr != p.data() + p.size()) break;
      nums.push_back(n);
    }
    if (nums.size() != 4 || parts.size() != 4) {
      fail(section, key, "expected row0,col0,row1,col1, got '" + *v + "'");
      return false;
    }
    out = {nums[0], nums[1], nums[2], nums[3]};
    return true;
  }

  void int_list(const std::string& section, const std::string& key, std::vector<int>& out) {
    const auto v = raw(section, key);
    if (!v) return;
    std::vector<int> nums;
    for (const auto& p : split_list(*v)) {
      int n = 0;
      const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), n);
      if (ec != std::errc{} || ptr != p.data() + p.size()) {
        fail(section, key, "expected a comma-separated list of integers, got '" + *v + "'");
        return;
      }
      nums.push_back(n);
    }
    out = nums;
  }

  template <typename F>
  void choice(const std::string& section, const std::string& key, F&& parse) {
    const auto v = raw(section, key);
    if (!v) return;
    try {
      parse(*v);
    } catch (const ValidationError& e) {
      fail(section, key, e.what());
    }
  }

  void fail(const std::string& section, const std::string& key, const std::string& message) {
    issues_.push_back(section + "." + key + ": " + message);
  }

  std::vector<std::string> finish() {
    for (const auto& [section, keys] : sections_) {
      for (const auto& [key, value] : keys) {
        if (!used_.count(section + "." + key)) {
          issues_.push_back(section + "." + key + ": unknown setting");
        }
      }
    }
    return issues_;
  }

 private:
  const ConfigSections& sections_;
  fs::path base_dir_;
  std::set<std::string> used_;
  std::vector<std::string> issues_;
};

FeedbackSourceKind parse_feedback_kind(std::string_view s) {
  for (auto k : {FeedbackSourceKind::interactive, FeedbackSourceKind::scripted,
                 FeedbackSourceKind::oracle, FeedbackSourceKind::random}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown feedback source '" + std::string(s) +
                        "' (expected interactive, scripted, oracle or random)");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : ValidationError("invalid configuration:\n  " + join(issues, "\n  ")),
      issues_(std::move(issues)) {}

fs::path ExperimentConfig::output_dir() const {
  return out_dir.empty() ? fs::path("runs") / run_name : out_dir;
}

std::optional<Rect> ExperimentConfig::oracle_region() const {
  if (feedback.oracle_region) return feedback.oracle_region;
  if (data_source == DataSourceKind::synthetic) return synthetic.signal_region;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> issues;
  auto fail = [&](const std::string& field, const std::string& message) {
    issues.push_back(field + ": " + message);
  };
  if (run_name.empty()) fail("run.name", "must not be empty");
  if (run_name.find_first_of("/\\") != std::string::npos) {
    fail("run.name", "must not contain path separators");
  }
  if (train.epochs < 1) fail("train.epochs", "must be >= 1");
  if (train.batch_size < 1) fail("train.batch_size", "must be >= 1");
  if (!(train.learning_rate > 0.0) || !std::isfinite(train.learning_rate)) {
    fail("train.learning_rate", "must be a positive number");
  }
  const int min_size = backend == BackendKind::refcnn ? 16 : 1;
  if (train.image_size < min_size) {
    fail("train.image_size", "must be >= " + std::to_string(min_size) + " for backend " +
                                 std::string(to_string(backend)));
  }
  if (train.optimizer.momentum < 0.0 || train.optimizer.momentum >= 1.0) {
    fail("train.momentum", "must lie in [0, 1)");
  }
  if (!(train.augment.mixup_alpha > 0.0)) fail("augment.mixup_alpha", "must be positive");
  if (!(train.augment.cutmix_alpha > 0.0)) fail("augment.cutmix_alpha", "must be positive");
  if (train.augment.cutout_height < 1) fail("augment.cutout_height", "must be >= 1");
  if (train.augment.cutout_width < 1) fail("augment.cutout_width", "must be >= 1");
  if (train.augmentation == AugmentationMode::cutout &&
      (train.augment.cutout_height > train.image_size ||
       train.augment.cutout_width > train.image_size)) {
    fail("augment.cutout_height", "mask " + std::to_string(train.augment.cutout_height) + "x" +
                                      std::to_string(train.augment.cutout_width) +
                                      " is larger than the " + std::to_string(train.image_size) +
                                      "px image");
  }

  if (train.augmentation == AugmentationMode::imil) {
    if (imil.num_outliers < 1) fail("imil.num_outliers", "must be >= 1");
    if (imil.grid_size < 2) fail("imil.grid_size", "must be >= 2");
    if (imil.grid_size > train.image_size) fail("imil.grid_size", "must not exceed image_size");
    if (imil.epochs.empty()) fail("imil.epoch", "needs at least one epoch");
    for (int e : imil.epochs) {
      if (e < 1 || e > train.epochs) {
        fail("imil.epoch", std::to_string(e) + " outside [1, " + std::to_string(train.epochs) + "]");
      }
    }
    if (imil.session_timeout_seconds && !(*imil.session_timeout_seconds > 0.0)) {
      fail("imil.session_timeout", "must be positive when set");
    }
    switch (feedback.kind) {
      case FeedbackSourceKind::scripted:
        if (feedback.scripted_path.empty()) fail("imil.scripted_path", "required for scripted feedback");
        break;
      case FeedbackSourceKind::oracle:
      case FeedbackSourceKind::random:
        if (!oracle_region()) {
          fail("imil.oracle_region", "required for oracle/random feedback on manifest data");
        }
        break;
      case FeedbackSourceKind::interactive:
        if (feedback.port < 0 || feedback.port > 65535) fail("imil.port", "must lie in [0, 65535]");
        break;
    }
    if (feedback.random_cells < 0) fail("imil.random_cells", "must be >= 0");
    if (const auto r = oracle_region()) {
      if (r->empty() || r->row0 < 0 || r->col0 < 0 || r->row1 > train.image_size ||
          r->col1 > train.image_size) {
        fail("imil.oracle_region", "must be a nonempty rectangle inside the image");
      }
    }
  }

  if (data_source == DataSourceKind::manifest) {
    if (manifest.manifest.empty()) fail("data.manifest", "required when data.source = manifest");
    if (manifest.test_manifest.empty() &&
        !(manifest.train_fraction > 0.0 && manifest.train_fraction < 1.0)) {
      fail("data.train_fraction", "must lie in (0, 1)");
    }
    if (manifest.channels != 1 && manifest.channels != 3) fail("data.channels", "must be 1 or 3");
  } else {
    if (!manifest.manifest.empty()) {
      fail("data.manifest", "set, but data.source is synthetic (exactly one source allowed)");
    }
    try {
      auto spec = synthetic;
      spec.image_size = train.image_size;
      spec.validate();
    } catch (const ValidationError& e) {
      issues.push_back(e.what());
    }
  }
  if (eval.ece_bins < 1) fail("eval.ece_bins", "must be >= 1");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

ConfigSections parse_ini(const std::string& text) {
  ConfigSections out;
  std::vector<std::string> issues;
  std::stringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        issues.push_back("line " + std::to_string(line_no) + ": malformed section header");
        continue;
      }
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      out[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      issues.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    if (section.empty()) {
      issues.push_back("line " + std::to_string(line_no) + ": setting outside a [section]");
      continue;
    }
    auto value = trim(std::string_view(t).substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string::npos) value = trim(value.substr(0, hash));
    out[section][trim(std::string_view(t).substr(0, eq))] = value;
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return out;
}

ExperimentConfig config_from_sections(const ConfigSections& sections, const fs::path& base_dir) {
  static const std::set<std::string> known{"run",  "train", "augment",   "imil",
                                           "data", "synthetic", "eval"};
  ExperimentConfig c;
  Reader r(sections, base_dir);

  r.str("run", "name", c.run_name);
  if (auto v = r.raw("run", "out"); v && !v->empty()) c.out_dir = *v;
  r.integer("run", "seed", c.train.seed);
  r.choice("run", "backend", [&](const std::string& v) {
    if (v == "refcnn") {
      c.backend = BackendKind::refcnn;
    } else if (v == "linear") {
      c.backend = BackendKind::linear;
    } else {
      throw ValidationError("expected refcnn or linear, got '" + v + "'");
    }
  });

  r.integer("train", "epochs", c.train.epochs);
  r.integer("train", "batch_size", c.train.batch_size);
  r.real("train", "learning_rate", c.train.learning_rate);
  r.integer("train", "image_size", c.train.image_size);
  r.choice("train", "augmentation",
           [&](const std::string& v) { c.train.augmentation = parse_augmentation_mode(v); });
  r.choice("train", "optimizer", [&](const std::string& v) {
    if (v == "sgd") {
      c.train.optimizer.kind = OptimizerKind::sgd;
    } else if (v == "adam") {
      c.train.optimizer.kind = OptimizerKind::adam;
    } else {
      throw ValidationError("expected sgd or adam, got '" + v + "'");
    }
  });
  r.real("train", "momentum", c.train.optimizer.momentum);

  r.real("augment", "mixup_alpha", c.train.augment.mixup_alpha);
  r.real("augment", "cutmix_alpha", c.train.augment.cutmix_alpha);
  r.boolean("augment", "cutmix_independent_mu", c.train.augment.cutmix_independent_mu);
  r.integer("augment", "cutout_height", c.train.augment.cutout_height);
  r.integer("augment", "cutout_width", c.train.augment.cutout_width);

  r.integer("imil", "num_outliers", c.imil.num_outliers);
  r.int_list("imil", "epoch", c.imil.epochs);
  r.integer("imil", "grid_size", c.imil.grid_size);
  r.choice("imil", "feedback", [&](const std::string& v) { apply_feedback_flag(c, v); });
  r.path("imil", "scripted_path", c.feedback.scripted_path);
  r.boolean("imil", "scripted_strict", c.feedback.scripted_strict);
  r.choice("imil", "oracle_policy", [&](const std::string& v) {
    if (v == "exact_cover") {
      c.feedback.oracle_policy = OraclePolicy::exact_cover;
    } else if (v == "minimal_cover") {
      c.feedback.oracle_policy = OraclePolicy::minimal_cover;
    } else {
      throw ValidationError("expected exact_cover or minimal_cover, got '" + v + "'");
    }
  });
  if (r.has("imil", "oracle_region") && !r.raw("imil", "oracle_region")->empty()) {
    Rect region;
    if (r.rect("imil", "oracle_region", region)) c.feedback.oracle_region = region;
  } else {
    r.raw("imil", "oracle_region");
  }
  r.integer("imil", "random_cells", c.feedback.random_cells);
  r.optional_real("imil", "session_timeout", c.imil.session_timeout_seconds);
  r.str("imil", "host", c.feedback.host);
  r.integer("imil", "port", c.feedback.port);

  r.choice("data", "source", [&](const std::string& v) {
    if (v == "synthetic") {
      c.data_source = DataSourceKind::synthetic;
    } else if (v == "manifest") {
      c.data_source = DataSourceKind::manifest;
    } else {
      throw ValidationError("expected synthetic or manifest, got '" + v + "'");
    }
  });
  r.path("data", "manifest", c.manifest.manifest);
  r.path("data", "image_root", c.manifest.image_root);
  r.path("data", "test_manifest", c.manifest.test_manifest);
  r.real("data", "train_fraction", c.manifest.train_fraction);
  r.integer("data", "channels", c.manifest.channels);
  c.synthetic.seed = c.train.seed;
  r.integer("data", "seed", c.synthetic.seed);
  if (!r.has("data", "source") && !c.manifest.manifest.empty()) {
    c.data_source = DataSourceKind::manifest;
  }

  c.synthetic.image_size = c.train.image_size;
  const SyntheticSpec defaults;
  if (!r.rect("synthetic", "signal_region", c.synthetic.signal_region)) {
    c.synthetic.signal_region =
        defaults.signal_region.scaled(defaults.image_size, c.train.image_size);
  }
  if (!r.rect("synthetic", "spurious_region", c.synthetic.spurious_region)) {
    c.synthetic.spurious_region =
        defaults.spurious_region.scaled(defaults.image_size, c.train.image_size);
  }
  r.integer("synthetic", "n_per_class", c.synthetic.n_per_class);
  r.integer("synthetic", "test_n_per_class", c.synthetic.test_n_per_class);
  r.real("synthetic", "train_correlation", c.synthetic.spurious_train_correlation);
  r.real("synthetic", "test_correlation", c.synthetic.spurious_test_correlation);
  r.real("synthetic", "noise_std", c.synthetic.noise_std);
  r.real("synthetic", "signal_amplitude_min", c.synthetic.signal_amplitude_min);
  r.real("synthetic", "signal_amplitude_max", c.synthetic.signal_amplitude_max);

  r.integer("eval", "ece_bins", c.eval.ece_bins);
  if (auto v = r.raw("eval", "cam_samples")) c.eval.cam_samples = split_list(*v);

  auto issues = r.finish();
  for (const auto& [section, keys] : sections) {
    if (!known.count(section)) {
      issues.erase(std::remove_if(issues.begin(), issues.end(),
                                  [&](const std::string& s) { return s.rfind(section + ".", 0) == 0; }),
                   issues.end());
      issues.push_back("[" + section + "]: unknown section");
    }
  }
  if (!issues.empty()) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      for (const auto& issue : e.issues()) {
        const auto field = issue.substr(0, issue.find(':'));
        const bool seen = std::any_of(issues.begin(), issues.end(), [&](const std::string& s) {
          return s.rfind(field + ":", 0) == 0;
        });
        if (!seen) issues.push_back(issue);
      }
    }
    throw ConfigError(std::move(issues));
  }
  c.validate();
  return c;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  auto abs = [](const fs::path& p) { return p.empty() ? std::string{} : fs::absolute(p).string(); };
  auto rect = [](const Rect& r) { return std::vector<int>{r.row0, r.col0, r.row1, r.col1}; };
  nlohmann::ordered_json j;
  j["run"] = {{"name", c.run_name},
              {"out", c.output_dir().string()},
              {"seed", c.train.seed},
              {"backend", to_string(c.backend)}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"image_size", c.train.image_size},
                {"augmentation", to_string(c.train.augmentation)},
                {"optimizer", to_string(c.train.optimizer.kind)},
                {"momentum", c.train.optimizer.momentum}};
  j["augment"] = {{"mixup_alpha", c.train.augment.mixup_alpha},
                  {"cutmix_alpha", c.train.augment.cutmix_alpha},
                  {"cutmix_independent_mu", c.train.augment.cutmix_independent_mu},
                  {"cutout_height", c.train.augment.cutout_height},
                  {"cutout_width", c.train.augment.cutout_width}};
  nlohmann::ordered_json imil{{"num_outliers", c.imil.num_outliers},
                              {"epoch", c.imil.epochs},
                              {"grid_size", c.imil.grid_size},
                              {"feedback", to_string(c.feedback.kind)},
                              {"scripted_path", abs(c.feedback.scripted_path)},
                              {"scripted_strict", c.feedback.scripted_strict},
                              {"oracle_policy", to_string(c.feedback.oracle_policy)}};
  imil["oracle_region"] = c.feedback.oracle_region ? nlohmann::ordered_json(rect(*c.feedback.oracle_region))
                                                   : nlohmann::ordered_json(nullptr);
  imil["random_cells"] = c.feedback.random_cells;
  imil["session_timeout"] = c.imil.session_timeout_seconds
                                ? nlohmann::ordered_json(*c.imil.session_timeout_seconds)
                                : nlohmann::ordered_json(nullptr);
  imil["host"] = c.feedback.host;
  imil["port"] = c.feedback.port;
  j["imil"] = std::move(imil);
  j["data"] = {{"source", to_string(c.data_source)},
               {"manifest", abs(c.manifest.manifest)},
               {"image_root", abs(c.manifest.image_root)},
               {"test_manifest", abs(c.manifest.test_manifest)},
               {"train_fraction", c.manifest.train_fraction},
               {"channels", c.manifest.channels},
               {"seed", c.synthetic.seed}};
  j["synthetic"] = {{"n_per_class", c.synthetic.n_per_class},
                    {"test_n_per_class", c.synthetic.test_n_per_class},
                    {"signal_region", rect(c.synthetic.signal_region)},
                    {"spurious_region", rect(c.synthetic.spurious_region)},
                    {"train_correlation", c.synthetic.spurious_train_correlation},
                    {"test_correlation", c.synthetic.spurious_test_correlation},
                    {"noise_std", c.synthetic.noise_std},
                    {"signal_amplitude_min", c.synthetic.signal_amplitude_min},
                    {"signal_amplitude_max", c.synthetic.signal_amplitude_max}};
  j["eval"] = {{"ece_bins", c.eval.ece_bins}, {"cam_samples", c.eval.cam_samples}};
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError({"config: top level must be an object"});
  std::function<std::string(const nlohmann::json&)> scalar = [&](const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
    if (v.is_array()) {
      std::vector<std::string> parts;
      for (const auto& e : v) parts.push_back(scalar(e));
      return join(parts, ",");
    }
    return v.dump();
  };
  ConfigSections sections;
  for (const auto& [name, body] : j.items()) {
    auto& section = sections[name];
    if (!body.is_object()) throw ConfigError({name + ": expected an object"});
    for (const auto& [key, value] : body.items()) {
      if (value.is_null()) {
        section[key] = "";
        continue;
      }
      section[key] = scalar(value);
    }
  }
  return config_from_sections(sections, base_dir);
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const auto base = path.parent_path();
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError({path.string() + ": " + e.what()});
    }
    return config_from_json(j, base);
  }
  return config_from_sections(parse_ini(buf.str()), base);
}

void apply_feedback_flag(ExperimentConfig& config, const std::string& flag) {
  if (flag.rfind("scripted:", 0) == 0) {
    config.feedback.kind = FeedbackSourceKind::scripted;
    config.feedback.scripted_path = flag.substr(9);
    return;
  }
  config.feedback.kind = parse_feedback_kind(flag);
}

}  // namespace imil
