#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topoterm/features.hpp"
#include "topoterm/tagger/model.hpp"
#include "topoterm/tagger/training.hpp"

namespace topoterm {

struct PipelinePaths {
  std::filesystem::path train_corpus;
  std::filesystem::path eval_corpus;
  std::optional<std::filesystem::path> validation_corpus;
  std::filesystem::path embeddings;
  std::optional<std::filesystem::path> oov_embeddings;
  std::filesystem::path probabilities;
  std::optional<std::filesystem::path> contextual_train;
  std::optional<std::filesystem::path> contextual_validation;
  std::optional<std::filesystem::path> contextual_eval;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
};

struct PipelineConfig {
  PipelinePaths paths;
  FeatureConfig features;
  std::vector<FeatureKind> model_kinds;
  // Applied on top of ModelConfig::for_kind.
  std::size_t max_seq_len = 64;
  std::size_t encoder_layers = 2;
  double dropout = 0.1;
  TrainingConfig training;
  // Share of training dialogues held out for validation when no validation
  // corpus is given.
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::size_t jobs = 1;

  ModelConfig model_config(FeatureKind kind) const;

  // Throws ValidationError for missing input files or out-of-range values.
  void validate() const;
};

// Relative paths resolve against the directory of the config file.
// TOPOTERM_CACHE_DIR, when set, overrides paths.cache_dir.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig parse_pipeline_config(std::string_view text, const std::filesystem::path& base_dir,
                                     const std::string& source = "<memory>");

// Stable JSON view used for stage hashing. Paths are left out; inputs are
// hashed by content instead.
nlohmann::json settings_json(const PipelineConfig& cfg);

}  // namespace topoterm
