#include "topoterm/evaluation.hpp"

#include "topoterm/error.hpp"

namespace topoterm {

bool term_match(const std::string& predicted, const std::string& gold) {
  return !predicted.empty() && predicted == gold;
}

TermSet true_positives(const TermSet& predicted, const TermSet& gold) {
  TermSet out;
  for (const auto& t : predicted.terms()) {
    auto it = gold.terms().find(t);
    if (it == gold.terms().end() || !term_match(t, *it)) continue;
    out.insert(t);
    for (const auto& d : gold.domains_of(t)) out.insert(t, d);
  }
  return out;
}

MetricsReport evaluate(const TermSet& predicted, const TermSet& gold) {
  MetricsReport m;
  m.predicted_count = predicted.size();
  m.gold_count = gold.size();
  m.true_positives = true_positives(predicted, gold).size();
  m.false_positives = m.predicted_count - m.true_positives;
  m.false_negatives = m.gold_count - m.true_positives;
  m.recall = m.gold_count == 0 ? 1.0 : static_cast<double>(m.true_positives) / m.gold_count;
  if (m.predicted_count == 0) {
    m.precision = m.gold_count == 0 ? 1.0 : 0.0;
  } else {
    m.precision = static_cast<double>(m.true_positives) / m.predicted_count;
  }
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

DomainBreakdown per_domain_recall(const TermSet& predicted, const TermSet& gold) {
  DomainBreakdown out;
  for (const auto& t : gold.terms()) {
    const bool found = predicted.contains(t);
    for (const auto& d : gold.domains_of(t)) {
      ++out.gold_count_by_domain[d];
      auto& f = out.found_count_by_domain[d];
      if (found) ++f;
    }
  }
  for (const auto& [d, n] : out.gold_count_by_domain) {
    out.recall_by_domain[d] = static_cast<double>(out.found_count_by_domain[d]) / static_cast<double>(n);
  }
  return out;
}

SeenUnseen seen_unseen_split(const TermSet& predicted_true_positives, const TermSet& training_gold) {
  SeenUnseen s;
  if (predicted_true_positives.empty()) return s;
  std::size_t seen = 0;
  for (const auto& t : predicted_true_positives.terms()) {
    if (training_gold.contains(t)) ++seen;
  }
  s.defined = true;
  const double total = static_cast<double>(predicted_true_positives.size());
  s.seen_fraction = seen / total;
  s.unseen_fraction = (predicted_true_positives.size() - seen) / total;
  return s;
}

OverlapReport overlap_report(const std::map<std::string, TermSet>& model_term_sets, const TermSet& gold) {
  const std::size_t k = model_term_sets.size();
  if (k < 2 || k > kMaxOverlapModels) {
    throw ValidationError("overlap_report needs 2 to " + std::to_string(kMaxOverlapModels) +
                          " models, got " + std::to_string(k));
  }
  OverlapReport r;
  for (const auto& [id, terms] : model_term_sets) {
    r.models.push_back(id);
    r.true_positive_sets[id] = true_positives(terms, gold);
  }
  // Membership mask of every true-positive term across the models.
  std::map<std::string, unsigned> mask_of;
  for (std::size_t m = 0; m < k; ++m) {
    for (const auto& t : r.true_positive_sets[r.models[m]].terms()) mask_of[t] |= 1u << m;
  }
  r.union_count = mask_of.size();
  const unsigned full = (1u << k) - 1;
  for (unsigned subset = 1; subset <= full; ++subset) {
    OverlapRegion region;
    for (std::size_t m = 0; m < k; ++m) {
      if (subset & (1u << m)) region.members.push_back(r.models[m]);
    }
    for (const auto& [t, mask] : mask_of) {
      if (mask == subset) ++region.exclusive_count;
      if ((mask & subset) == subset) ++region.intersection_count;
    }
    r.regions.push_back(std::move(region));
  }
  return r;
}

nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j = {{"precision", m.precision},
                      {"recall", m.recall},
                      {"f1", m.f1},
                      {"true_positives", m.true_positives},
                      {"false_positives", m.false_positives},
                      {"false_negatives", m.false_negatives},
                      {"predicted_count", m.predicted_count},
                      {"gold_count", m.gold_count}};
  if (m.predicted_occurrences) j["predicted_occurrences"] = *m.predicted_occurrences;
  return j;
}

nlohmann::json to_json(const DomainBreakdown& d) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [dom, r] : d.recall_by_domain) {
    j[dom] = {{"recall", r},
              {"gold_count", d.gold_count_by_domain.at(dom)},
              {"found", d.found_count_by_domain.at(dom)}};
  }
  return j;
}

nlohmann::json to_json(const SeenUnseen& s) {
  if (!s.defined) return {{"seen", nullptr}, {"unseen", nullptr}};
  return {{"seen", s.seen_fraction}, {"unseen", s.unseen_fraction}};
}

nlohmann::json to_json(const OverlapReport& o) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : o.regions) {
    regions.push_back({{"members", r.members},
                       {"exclusive", r.exclusive_count},
                       {"intersection", r.intersection_count}});
  }
  nlohmann::json sizes = nlohmann::json::object();
  for (const auto& [id, s] : o.true_positive_sets) sizes[id] = s.size();
  return {{"models", o.models}, {"true_positives", sizes}, {"regions", regions}, {"union", o.union_count}};
}

}  // namespace topoterm
