#include "topoterm/mlm.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "topoterm/error.hpp"

namespace topoterm {

void ExactSum::add(double x) {
  // Shewchuk's grow-expansion: keep non-overlapping partials whose exact sum
  // equals the exact sum of all inputs.
  std::size_t i = 0;
  for (double y : partials_) {
    if (std::abs(x) < std::abs(y)) std::swap(x, y);
    const double hi = x + y;
    const double lo = y - (hi - x);
    if (lo != 0.0) partials_[i++] = lo;
    x = hi;
  }
  partials_.resize(i);
  partials_.push_back(x);
}

double ExactSum::value() const {
  // Correctly rounded sum of the partials (same scheme as Python's fsum).
  if (partials_.empty()) return 0.0;
  std::size_t n = partials_.size();
  double hi = partials_[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials_[--n];
    hi = x + y;
    const double yr = hi - x;
    lo = y - yr;
    if (lo != 0.0) break;
  }
  if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

void MlmScoreTable::add(const TokenProbabilityRecord& r) {
  if (!(r.p_mask >= 0.0 && r.p_mask <= 1.0)) {
    throw ValidationError("probability record " + r.utt_id + "#" + std::to_string(r.token_index) +
                          " ('" + r.word + "'): p_mask " + std::to_string(r.p_mask) +
                          " outside [0, 1]");
  }
  auto& e = accum_[r.word];
  e.sum.add(1.0 - r.p_mask);
  ++e.count;
}

double MlmScoreTable::score_of(const std::string& word) const {
  auto it = accum_.find(word);
  if (it == accum_.end()) {
    static std::mutex mu;
    static std::set<std::string> warned;
    std::lock_guard lock(mu);
    if (warned.insert(word).second) {
      spdlog::warn("no MLM score for '{}'; using default {}", word, default_score_);
    }
    return default_score_;
  }
  const Entry& e = it->second;
  if (e.fixed >= 0.0) return e.fixed;
  return e.sum.value() / static_cast<double>(e.count);
}

std::size_t MlmScoreTable::occurrence_count(const std::string& word) const {
  auto it = accum_.find(word);
  return it == accum_.end() ? 0 : it->second.count;
}

std::vector<std::string> MlmScoreTable::words() const {
  std::vector<std::string> out;
  out.reserve(accum_.size());
  for (const auto& [w, e] : accum_) out.push_back(w);
  return out;
}

void MlmScoreTable::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write score table " + path.string());
  char buf[64];
  for (const auto& [w, e] : accum_) {
    const auto res = std::to_chars(buf, buf + sizeof buf, score_of(w));
    out << w << '\t';
    out.write(buf, res.ptr - buf);
    out << '\t' << e.count << '\n';
  }
}

MlmScoreTable MlmScoreTable::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open score table " + path.string());
  MlmScoreTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word, score, count;
    if (!std::getline(ss, word, '\t') || !std::getline(ss, score, '\t') || !std::getline(ss, count)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected word<TAB>score<TAB>count");
    }
    Entry e;
    std::from_chars(score.data(), score.data() + score.size(), e.fixed);
    e.count = std::stoull(count);
    if (!(e.fixed >= 0.0 && e.fixed <= 1.0) || e.count == 0) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": invalid score row");
    }
    t.accum_[word] = std::move(e);
  }
  return t;
}

MlmScoreTable aggregate_mlm_scores(std::span<const TokenProbabilityRecord> records) {
  MlmScoreTable t;
  for (const auto& r : records) t.add(r);
  return t;
}

std::vector<TokenProbabilityRecord> parse_probability_records(std::string_view text,
                                                              const std::string& source) {
  std::vector<TokenProbabilityRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("utt_id").get<std::string>();
      const auto tokens = j.at("tokens").get<std::vector<std::string>>();
      const auto probs = j.at("p_mask").get<std::vector<double>>();
      if (tokens.size() != probs.size()) {
        throw ParseError(where + ": tokens and p_mask lengths differ");
      }
      for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back({id, i, tokens[i], probs[i]});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<TokenProbabilityRecord> load_probability_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open probability file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_probability_records(ss.str(), path.string());
}

std::string probability_record_json(const std::string& utt_id, std::span<const std::string> tokens,
                                    std::span<const double> p_mask) {
  nlohmann::json j = {{"utt_id", utt_id},
                      {"tokens", std::vector<std::string>(tokens.begin(), tokens.end())},
                      {"p_mask", std::vector<double>(p_mask.begin(), p_mask.end())}};
  return j.dump();
}

}  // namespace topoterm
