#include "imil/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "imil/errors.hpp"

namespace imil {
namespace {

constexpr char kMagic[8] = {'I', 'M', 'I', 'L', 'C', 'K', 'P', 'T'};

void write_doubles(std::ostream& out, std::span<const double> values) {
  const std::uint64_t n = values.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n > (1ULL << 32)) throw IoError("corrupt checkpoint blob");
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("truncated checkpoint blob");
  return values;
}

std::filesystem::path manifest_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Backend& backend,
                     const CheckpointManifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const auto snap = backend.snapshot();
  write_doubles(out, snap.parameters);
  write_doubles(out, snap.optimizer_state);
  if (!out) throw IoError("short write to " + path.string());

  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["architecture"] = backend.architecture();
  j["seed"] = manifest.seed;
  j["epoch"] = manifest.epoch;
  j["parameter_count"] = snap.parameters.size();
  std::ofstream m(manifest_path(path), std::ios::trunc);
  if (!m) throw IoError("cannot write " + manifest_path(path).string());
  m << j.dump(2) << '\n';
}

CheckpointManifest load_checkpoint(const std::filesystem::path& path, Backend& backend) {
  std::ifstream m(manifest_path(path));
  if (!m) throw IoError("missing checkpoint manifest " + manifest_path(path).string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint manifest: " + std::string(e.what()));
  }
  CheckpointManifest manifest;
  manifest.format_version = j.at("format_version").get<int>();
  manifest.architecture = j.at("architecture").get<std::string>();
  manifest.seed = j.at("seed").get<std::uint64_t>();
  manifest.epoch = j.at("epoch").get<int>();
  if (manifest.format_version != kCheckpointFormatVersion) {
    throw ValidationError("unsupported checkpoint format version " +
                          std::to_string(manifest.format_version));
  }
  if (manifest.architecture != backend.architecture()) {
    throw ValidationError("checkpoint architecture '" + manifest.architecture +
                          "' does not match backend '" + backend.architecture() + "'");
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  std::uint32_t version = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0 ||
      version != kCheckpointFormatVersion) {
    throw IoError(path.string() + " is not a version-" +
                  std::to_string(kCheckpointFormatVersion) + " checkpoint");
  }
  BackendSnapshot snap;
  snap.parameters = read_doubles(in);
  snap.optimizer_state = read_doubles(in);
  backend.restore(snap);
  return manifest;
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss,train_acc\n";
  char line[96];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g\n", r.epoch, r.loss, r.train_acc);
    out << line;
  }
}

std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<EpochRecord> history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &r.epoch, &r.loss, &r.train_acc) != 3) {
      throw IoError("malformed history line '" + line + "'");
    }
    history.push_back(r);
  }
  return history;
}

}  // namespace imil
