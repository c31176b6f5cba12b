#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace topoterm {

enum class Speaker { kUser, kSystem };

enum class Tag : unsigned char { kB = 0, kI = 1, kO = 2 };
inline constexpr std::size_t kNumTags = 3;

char tag_char(Tag t);
Tag tag_from_char(char c);

// Inclusive token range [start, end] annotated with an ontology value.
struct SpanAnnotation {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string value;
  std::string domain;
  std::string slot;
};

struct Utterance {
  std::string utt_id;
  std::string dialogue_id;
  Speaker speaker = Speaker::kUser;
  std::vector<std::string> tokens;
  std::vector<SpanAnnotation> spans;

  bool is_user() const { return speaker == Speaker::kUser; }
};

using BioSequence = std::vector<Tag>;

struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  friend auto operator<=>(const TokenSpan&, const TokenSpan&) = default;
};

// Unique normalized term strings with the domains each was annotated under.
class TermSet {
 public:
  TermSet() = default;

  // Empty terms are ignored. Returns true if the term was new.
  bool insert(const std::string& term, const std::string& domain = {});
  void merge(const TermSet& other);

  bool contains(const std::string& term) const { return terms_.contains(term); }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  const std::set<std::string>& terms() const { return terms_; }
  const std::set<std::string>& domains_of(const std::string& term) const;
  const std::map<std::string, std::set<std::string>>& domain_map() const { return domain_of_; }

  friend bool operator==(const TermSet&, const TermSet&) = default;

 private:
  std::set<std::string> terms_;
  std::map<std::string, std::set<std::string>> domain_of_;
};

// Throws ValidationError when spans are out of range, inverted or overlapping.
void validate_utterance(const Utterance& u);

// Reads the corpus JSONL format. Errors name the line number or the utt_id.
std::vector<Utterance> load_corpus(const std::filesystem::path& path);
std::vector<Utterance> parse_corpus(std::string_view text, const std::string& source = "<memory>");
std::string corpus_record_json(const Utterance& u);
void write_corpus(const std::filesystem::path& path, std::span<const Utterance> corpus);

BioSequence bio_labels(const Utterance& u);

// Lowercases, strips stopwords at both edges and joins with single spaces.
std::string normalize_term(std::span<const std::string> tokens);

TermSet extract_gold_terms(std::span<const Utterance> corpus, bool user_only = true);

std::vector<Utterance> user_utterances(std::span<const Utterance> corpus);

}  // namespace topoterm
