#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "topoterm/tagger/model.hpp"
#include "topoterm/tagger/training.hpp"

namespace topoterm {

// Binary container:
//   "TTCK" | u32 version | u64 header length | JSON header | parameter blobs
// The header carries the model config, seed, normalizer, training history and
// a manifest of (name, rows, cols); blobs follow in manifest order as
// little-endian float32, row-major.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TaggerModel model;
  std::optional<TrainResult> history;
  nlohmann::json training;  // training config, empty when unknown
};

void save_checkpoint(const std::filesystem::path& path, const TaggerModel& model,
                     const TrainResult* history, const TrainingConfig* training);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace topoterm
