#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace topoterm {

struct TokenProbabilityRecord {
  std::string utt_id;
  std::size_t token_index = 0;
  std::string word;
  double p_mask = 0.0;  // probability of the original word at the masked slot
};

// Error-free running sum (Shewchuk partials). The rounded result depends only
// on the multiset of addends, never on their order.
class ExactSum {
 public:
  void add(double x);
  double value() const;

 private:
  std::vector<double> partials_;
};

inline constexpr double kDefaultMlmScore = 0.5;

class MlmScoreTable {
 public:
  // Throws ValidationError if p_mask lies outside [0, 1].
  void add(const TokenProbabilityRecord& r);

  // Mean of (1 - p_mask) over all occurrences; unseen words get the default
  // score and a logged warning.
  double score_of(const std::string& word) const;
  bool contains(const std::string& word) const { return accum_.contains(word); }
  std::size_t occurrence_count(const std::string& word) const;
  std::size_t size() const { return accum_.size(); }
  std::vector<std::string> words() const;

  void set_default_score(double s) { default_score_ = s; }

  // "word<TAB>score<TAB>count" per line, sorted by word.
  void save_tsv(const std::filesystem::path& path) const;
  static MlmScoreTable load_tsv(const std::filesystem::path& path);

 private:
  struct Entry {
    ExactSum sum;
    std::size_t count = 0;
    double fixed = -1.0;  // score loaded from a TSV table
  };
  std::map<std::string, Entry> accum_;
  double default_score_ = kDefaultMlmScore;
};

MlmScoreTable aggregate_mlm_scores(std::span<const TokenProbabilityRecord> records);

// Probability JSONL: {"utt_id", "tokens", "p_mask"} per utterance.
std::vector<TokenProbabilityRecord> load_probability_records(const std::filesystem::path& path);
std::vector<TokenProbabilityRecord> parse_probability_records(std::string_view text,
                                                              const std::string& source = "<memory>");
std::string probability_record_json(const std::string& utt_id, std::span<const std::string> tokens,
                                    std::span<const double> p_mask);

}  // namespace topoterm
