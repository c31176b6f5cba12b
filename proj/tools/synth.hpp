#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "topoterm/corpus.hpp"

namespace topoterm::synth {

// Toy dialogue corpus with annotated slot values, word embeddings in which
// value words and function words have different local geometry, masked-word
// probabilities that are low on values, and optionally frozen contextual
// token vectors.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t train_dialogues = 24;
  std::size_t eval_dialogues = 12;
  std::size_t turns_per_dialogue = 4;  // alternating user/system, user first
  std::size_t filler_words = 160;
  std::size_t value_words = 80;
  std::size_t dim = 16;
  std::size_t oov_words = 4;      // corpus words embedded only in the OOV file
  std::size_t unknown_words = 2;  // corpus words with no embedding at all
  bool contextual = false;
  std::size_t contextual_dim = 768;
  // Settings written into pipeline.toml.
  std::vector<std::string> model_kinds = {"mlm", "pimage", "codensity", "wasserstein"};
  std::size_t epochs = 3;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
};

struct SynthCorpus {
  std::vector<Utterance> train, eval;
};

SynthCorpus generate_corpus(const SynthConfig& cfg);

// Writes train.jsonl, eval.jsonl, embeddings.tsv, oov.tsv,
// probabilities.jsonl, pipeline.toml and, when requested,
// contextual_train.bin / contextual_eval.bin into `dir`.
void write_fixtures(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace topoterm::synth
