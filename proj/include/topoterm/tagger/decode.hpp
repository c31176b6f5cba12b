#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topoterm/corpus.hpp"
#include "topoterm/tagger/model.hpp"

namespace topoterm {

// A span opens at B and extends over the following I tags. An I with no
// open span starts one of its own.
std::vector<TokenSpan> decode_spans(std::span<const Tag> tags);

struct Prediction {
  std::string utt_id;
  std::string model_id;
  std::vector<std::array<double, kNumTags>> probs;
  BioSequence tags;
  std::vector<TokenSpan> spans;
};

// Argmax tagging; ties go to the lower tag index (B before I before O).
Prediction tag(const TaggerModel& model, const std::string& model_id, const std::string& utt_id,
               std::span<const TokenFeatures> features);

// Builds a prediction from explicit probabilities.
Prediction prediction_from_probs(std::string utt_id, std::string model_id,
                                 std::vector<std::array<double, kNumTags>> probs);

// Normalized terms of the decoded spans, looked up against the utterances'
// tokens by utt_id. Predictions for unknown utterances are an error.
TermSet predicted_terms(std::span<const Prediction> preds, std::span<const Utterance> corpus);

TermSet union_predictions(std::span<const TermSet> per_model);

// Mean over tokens of the Euclidean distance between the predicted
// probabilities and the one-hot gold tag.
double uncertainty_l2(const Prediction& pred, std::span<const Tag> gold);

// Token-weighted mean over a whole prediction set.
double mean_uncertainty_l2(std::span<const Prediction> preds, std::span<const Utterance> corpus);

// Number of predicted spans (occurrences, not unique terms).
std::size_t span_count(std::span<const Prediction> preds);

std::string prediction_json(const Prediction& p);
Prediction parse_prediction(std::string_view line);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace topoterm
