#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "topoterm/corpus.hpp"
#include "topoterm/tagger/decode.hpp"
#include "topoterm/tagger/model.hpp"

namespace topoterm {

struct ModelPredictions {
  std::string model_id;
  FeatureKind kind = FeatureKind::kMlm;
  std::vector<Prediction> predictions;
};

struct EvaluationInputs {
  std::vector<Utterance> eval_utterances;  // the utterances that were tagged
  TermSet gold;                            // gold terms of the evaluation corpus
  TermSet training_gold;                   // for the seen/unseen split
  std::vector<ModelPredictions> models;
};

// Per-model metrics, the TDA union and the all-model union, per-domain
// recall, seen/unseen split, uncertainty, tag counts and Venn regions.
nlohmann::json build_report(const EvaluationInputs& in);

std::string render_report_text(const nlohmann::json& report);
// model,domain,recall,found,gold_count
std::string per_domain_csv(const nlohmann::json& report);
// members,exclusive,intersection
std::string overlap_csv(const nlohmann::json& report);

}  // namespace topoterm
