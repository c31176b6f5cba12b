#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topoterm/corpus.hpp"

namespace topoterm {

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t predicted_count = 0;
  std::size_t gold_count = 0;
  // Number of predicted span occurrences before deduplication, when known.
  std::optional<std::size_t> predicted_occurrences;
};

// Exact string equality of two normalized terms; empty never matches.
bool term_match(const std::string& predicted, const std::string& gold);

MetricsReport evaluate(const TermSet& predicted, const TermSet& gold);

TermSet true_positives(const TermSet& predicted, const TermSet& gold);

struct DomainBreakdown {
  std::map<std::string, double> recall_by_domain;
  std::map<std::string, std::size_t> gold_count_by_domain;
  std::map<std::string, std::size_t> found_count_by_domain;
};

// A gold term attributed to several domains counts toward each of them.
DomainBreakdown per_domain_recall(const TermSet& predicted, const TermSet& gold);

struct SeenUnseen {
  bool defined = false;  // false when there are no true positives (0/0)
  double seen_fraction = 0.0;
  double unseen_fraction = 0.0;
};

SeenUnseen seen_unseen_split(const TermSet& predicted_true_positives, const TermSet& training_gold);

inline constexpr std::size_t kMaxOverlapModels = 5;

struct OverlapRegion {
  std::vector<std::string> members;  // models whose sets contain the region
  std::size_t exclusive_count = 0;   // terms in exactly these models
  std::size_t intersection_count = 0;  // terms in at least these models
};

struct OverlapReport {
  std::vector<std::string> models;
  std::map<std::string, TermSet> true_positive_sets;
  std::vector<OverlapRegion> regions;  // every nonempty subset of models
  std::size_t union_count = 0;
};

// Venn decomposition of the per-model true positives. Needs 2 to 5 models.
OverlapReport overlap_report(const std::map<std::string, TermSet>& model_term_sets, const TermSet& gold);

nlohmann::json to_json(const MetricsReport& m);
nlohmann::json to_json(const DomainBreakdown& d);
nlohmann::json to_json(const SeenUnseen& s);
nlohmann::json to_json(const OverlapReport& o);

}  // namespace topoterm
