#include "topoterm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "topoterm/error.hpp"
#include "topoterm/stopwords.hpp"

namespace topoterm {

using nlohmann::json;

char tag_char(Tag t) {
  switch (t) {
    case Tag::kB: return 'B';
    case Tag::kI: return 'I';
    case Tag::kO: return 'O';
  }
  return 'O';
}

Tag tag_from_char(char c) {
  switch (c) {
    case 'B': return Tag::kB;
    case 'I': return Tag::kI;
    case 'O': return Tag::kO;
    default: throw ParseError(std::string("unknown BIO tag '") + c + "'");
  }
}

bool TermSet::insert(const std::string& term, const std::string& domain) {
  if (term.empty()) return false;
  const bool added = terms_.insert(term).second;
  auto& doms = domain_of_[term];
  if (!domain.empty()) doms.insert(domain);
  return added;
}

void TermSet::merge(const TermSet& other) {
  for (const auto& t : other.terms_) {
    terms_.insert(t);
    const auto& doms = other.domains_of(t);
    domain_of_[t].insert(doms.begin(), doms.end());
  }
}

const std::set<std::string>& TermSet::domains_of(const std::string& term) const {
  static const std::set<std::string> kNone;
  auto it = domain_of_.find(term);
  return it == domain_of_.end() ? kNone : it->second;
}

void validate_utterance(const Utterance& u) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& s : u.spans) {
    if (s.start > s.end || s.end >= u.tokens.size()) {
      throw ValidationError("utterance '" + u.utt_id + "': span [" + std::to_string(s.start) +
                            ", " + std::to_string(s.end) + "] outside " +
                            std::to_string(u.tokens.size()) + " tokens");
    }
    ranges.emplace_back(s.start, s.end);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first <= ranges[i - 1].second) {
      throw ValidationError("utterance '" + u.utt_id + "': overlapping spans");
    }
  }
}

namespace {

Utterance utterance_from_json(const json& j) {
  Utterance u;
  u.utt_id = j.at("utt_id").get<std::string>();
  u.dialogue_id = j.at("dialogue_id").get<std::string>();
  const auto speaker = j.at("speaker").get<std::string>();
  if (speaker == "user") {
    u.speaker = Speaker::kUser;
  } else if (speaker == "system") {
    u.speaker = Speaker::kSystem;
  } else {
    throw ValidationError("utterance '" + u.utt_id + "': unknown speaker '" + speaker + "'");
  }
  u.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& s : j.at("spans")) {
    SpanAnnotation a;
    a.start = s.at("start").get<std::size_t>();
    a.end = s.at("end").get<std::size_t>();
    a.value = s.value("value", "");
    a.domain = s.value("domain", "");
    a.slot = s.value("slot", "");
    u.spans.push_back(std::move(a));
  }
  return u;
}

}  // namespace

std::vector<Utterance> parse_corpus(std::string_view text, const std::string& source) {
  std::vector<Utterance> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    Utterance u;
    try {
      u = utterance_from_json(j);
    } catch (const json::exception& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": bad record: " + e.what());
    }
    validate_utterance(u);
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Utterance> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str(), path.string());
}

std::string corpus_record_json(const Utterance& u) {
  json spans = json::array();
  for (const auto& s : u.spans) {
    spans.push_back({{"start", s.start},
                     {"end", s.end},
                     {"value", s.value},
                     {"domain", s.domain},
                     {"slot", s.slot}});
  }
  json j = {{"utt_id", u.utt_id},
            {"dialogue_id", u.dialogue_id},
            {"speaker", u.is_user() ? "user" : "system"},
            {"tokens", u.tokens},
            {"spans", spans}};
  return j.dump();
}

void write_corpus(const std::filesystem::path& path, std::span<const Utterance> corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file " + path.string());
  for (const auto& u : corpus) out << corpus_record_json(u) << '\n';
}

BioSequence bio_labels(const Utterance& u) {
  BioSequence tags(u.tokens.size(), Tag::kO);
  for (const auto& s : u.spans) {
    tags[s.start] = Tag::kB;
    for (std::size_t i = s.start + 1; i <= s.end; ++i) tags[i] = Tag::kI;
  }
  return tags;
}

std::string normalize_term(std::span<const std::string> tokens) {
  std::vector<std::string> lower;
  lower.reserve(tokens.size());
  for (const auto& t : tokens) {
    std::string l = t;
    std::transform(l.begin(), l.end(), l.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    lower.push_back(std::move(l));
  }
  std::size_t first = 0;
  std::size_t last = lower.size();
  while (first < last && (lower[first].empty() || is_stopword(lower[first]))) ++first;
  while (last > first && (lower[last - 1].empty() || is_stopword(lower[last - 1]))) --last;
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (lower[i].empty()) continue;
    if (!out.empty()) out += ' ';
    out += lower[i];
  }
  return out;
}

TermSet extract_gold_terms(std::span<const Utterance> corpus, bool user_only) {
  TermSet terms;
  for (const auto& u : corpus) {
    if (user_only && !u.is_user()) continue;
    for (const auto& s : u.spans) {
      std::span<const std::string> toks(u.tokens.data() + s.start, s.end - s.start + 1);
      terms.insert(normalize_term(toks), s.domain);
    }
  }
  return terms;
}

std::vector<Utterance> user_utterances(std::span<const Utterance> corpus) {
  std::vector<Utterance> out;
  for (const auto& u : corpus) {
    if (u.is_user()) out.push_back(u);
  }
  return out;
}

}  // namespace topoterm
