#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "imil/model.hpp"
#include "imil/trainer.hpp"

namespace imil {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointManifest {
  int format_version = kCheckpointFormatVersion;
  std::string architecture;
  std::uint64_t seed = 0;
  int epoch = 0;
};

/// Writes the binary parameter blob at `path` and its JSON manifest at
/// `path` + ".json".
void save_checkpoint(const std::filesystem::path& path, const Backend& backend,
                     const CheckpointManifest& manifest);

/// Restores parameters and optimizer state; rejects architecture or version mismatch.
CheckpointManifest load_checkpoint(const std::filesystem::path& path, Backend& backend);

/// `epoch,loss,train_acc` with a header row.
void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);
std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path);

}  // namespace imil
