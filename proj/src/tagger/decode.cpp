#include "topoterm/tagger/decode.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "topoterm/error.hpp"

namespace topoterm {

std::vector<TokenSpan> decode_spans(std::span<const Tag> tags) {
  std::vector<TokenSpan> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case Tag::kB:
        spans.push_back({i, i});
        open = true;
        break;
      case Tag::kI:
        if (open) {
          spans.back().end = i;
        } else {
          spans.push_back({i, i});
          open = true;
        }
        break;
      case Tag::kO:
        open = false;
        break;
    }
  }
  return spans;
}

Prediction prediction_from_probs(std::string utt_id, std::string model_id,
                                 std::vector<std::array<double, kNumTags>> probs) {
  Prediction p;
  p.utt_id = std::move(utt_id);
  p.model_id = std::move(model_id);
  p.probs = std::move(probs);
  p.tags.reserve(p.probs.size());
  for (const auto& row : p.probs) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < kNumTags; ++k) {
      if (row[k] > row[best]) best = k;
    }
    p.tags.push_back(static_cast<Tag>(best));
  }
  p.spans = decode_spans(p.tags);
  return p;
}

Prediction tag(const TaggerModel& model, const std::string& model_id, const std::string& utt_id,
               std::span<const TokenFeatures> features) {
  const nn::Mat probs = model.probabilities(features);
  std::vector<std::array<double, kNumTags>> rows(features.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < kNumTags; ++k) {
      rows[i][k] = probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
  }
  return prediction_from_probs(utt_id, model_id, std::move(rows));
}

TermSet predicted_terms(std::span<const Prediction> preds, std::span<const Utterance> corpus) {
  std::unordered_map<std::string, const Utterance*> by_id;
  for (const auto& u : corpus) by_id.emplace(u.utt_id, &u);
  TermSet out;
  for (const auto& p : preds) {
    auto it = by_id.find(p.utt_id);
    if (it == by_id.end()) throw ValidationError("prediction for unknown utterance '" + p.utt_id + "'");
    const auto& tokens = it->second->tokens;
    for (const auto& s : p.spans) {
      if (s.end >= tokens.size()) {
        throw ValidationError("prediction span beyond utterance '" + p.utt_id + "'");
      }
      out.insert(normalize_term(std::span(tokens).subspan(s.start, s.end - s.start + 1)));
    }
  }
  return out;
}

TermSet union_predictions(std::span<const TermSet> per_model) {
  TermSet out;
  for (const auto& t : per_model) out.merge(t);
  return out;
}

namespace {

double token_distance(const std::array<double, kNumTags>& p, Tag gold) {
  double s = 0.0;
  for (std::size_t k = 0; k < kNumTags; ++k) {
    const double target = k == static_cast<std::size_t>(gold) ? 1.0 : 0.0;
    s += (p[k] - target) * (p[k] - target);
  }
  return std::sqrt(s);
}

}  // namespace

double uncertainty_l2(const Prediction& pred, std::span<const Tag> gold) {
  if (gold.size() != pred.probs.size()) {
    throw ValidationError("uncertainty_l2: " + std::to_string(pred.probs.size()) +
                          " predicted tokens vs " + std::to_string(gold.size()) + " gold tags for '" +
                          pred.utt_id + "'");
  }
  if (gold.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) s += token_distance(pred.probs[i], gold[i]);
  return s / static_cast<double>(gold.size());
}

double mean_uncertainty_l2(std::span<const Prediction> preds, std::span<const Utterance> corpus) {
  std::unordered_map<std::string, const Utterance*> by_id;
  for (const auto& u : corpus) by_id.emplace(u.utt_id, &u);
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& p : preds) {
    auto it = by_id.find(p.utt_id);
    if (it == by_id.end()) throw ValidationError("prediction for unknown utterance '" + p.utt_id + "'");
    const BioSequence gold = bio_labels(*it->second);
    s += uncertainty_l2(p, gold) * static_cast<double>(gold.size());
    n += gold.size();
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

std::size_t span_count(std::span<const Prediction> preds) {
  std::size_t n = 0;
  for (const auto& p : preds) n += p.spans.size();
  return n;
}

std::string prediction_json(const Prediction& p) {
  nlohmann::json j;
  j["utt_id"] = p.utt_id;
  j["model_id"] = p.model_id;
  auto arr = nlohmann::json::array();
  for (Tag t : p.tags) arr.push_back(std::string(1, tag_char(t)));
  j["tags"] = std::move(arr);
  auto probs = nlohmann::json::array();
  for (const auto& row : p.probs) probs.push_back({row[0], row[1], row[2]});
  j["probs"] = std::move(probs);
  auto spans = nlohmann::json::array();
  for (const auto& s : p.spans) spans.push_back({s.start, s.end});
  j["spans"] = std::move(spans);
  return j.dump();
}

Prediction parse_prediction(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prediction record: ") + e.what());
  }
  try {
    Prediction p;
    p.utt_id = j.at("utt_id").get<std::string>();
    p.model_id = j.at("model_id").get<std::string>();
    for (const auto& t : j.at("tags")) {
      const auto s = t.get<std::string>();
      if (s.size() != 1) throw ParseError("bad tag '" + s + "' in prediction for '" + p.utt_id + "'");
      p.tags.push_back(tag_from_char(s[0]));
    }
    for (const auto& row : j.at("probs")) {
      if (row.size() != kNumTags) throw ParseError("probability row of wrong length for '" + p.utt_id + "'");
      p.probs.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
    }
    for (const auto& s : j.at("spans")) {
      p.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    }
    if (p.probs.size() != p.tags.size()) {
      throw ParseError("prediction for '" + p.utt_id + "' has mismatched tags and probs");
    }
    if (p.spans != decode_spans(p.tags)) {
      throw ParseError("prediction for '" + p.utt_id + "' has spans inconsistent with its tags");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prediction record: ") + e.what());
  }
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write predictions to " + path.string());
  for (const auto& p : preds) out << prediction_json(p) << '\n';
  if (!out) throw Error("failed writing predictions to " + path.string());
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open prediction file " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_prediction(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace topoterm
