#include <doctest.h>

#include <random>

#include "topoterm/error.hpp"
#include "topoterm/evaluation.hpp"

using namespace topoterm;

namespace {

TermSet terms(std::initializer_list<const char*> list, const char* domain = "") {
  TermSet s;
  for (const char* t : list) s.insert(t, domain);
  return s;
}

const OverlapRegion& region(const OverlapReport& r, std::vector<std::string> members) {
  for (const auto& reg : r.regions) {
    if (reg.members == members) return reg;
  }
  FAIL("region not reported");
  return r.regions.front();
}

}  // namespace

TEST_CASE("term_match is strict string equality of normalized terms") {
  CHECK(term_match("expensive", "expensive"));
  CHECK_FALSE(term_match("pizza hut", "pizza hut cherry hinton"));
  CHECK_FALSE(term_match("", ""));
  CHECK_FALSE(term_match("", "x"));
}

TEST_CASE("evaluate examples") {
  auto perfect = evaluate(terms({"a", "b"}), terms({"a", "b"}));
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  auto half = evaluate(terms({"a", "x"}), terms({"a", "b"}));
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f1 == 0.5);
  CHECK(half.true_positives == 1);
  CHECK(half.false_positives == 1);
  CHECK(half.false_negatives == 1);
  CHECK(half.true_positives + half.false_positives == half.predicted_count);

  auto none = evaluate(TermSet{}, terms({"a"}));
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  CHECK(evaluate(terms({"a"}), TermSet{}).recall == 1.0);
}

TEST_CASE("evaluate is consistent on random sets") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.4);
  for (int t = 0; t < 200; ++t) {
    TermSet pred, gold;
    for (int i = 0; i < 30; ++i) {
      if (coin(rng)) pred.insert("t" + std::to_string(i));
      if (coin(rng)) gold.insert("t" + std::to_string(i));
    }
    auto m = evaluate(pred, gold);
    if (!pred.empty()) {
      auto self = evaluate(pred, pred);
      CHECK(self.precision == 1.0);
      CHECK(self.recall == 1.0);
    }
    if (m.precision + m.recall > 0) {
      CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)));
    }
    CHECK(m.true_positives + m.false_positives == m.predicted_count);
    CHECK(m.true_positives + m.false_negatives == m.gold_count);

    // Adding a gold term never lowers recall; a non-gold term never changes
    // recall and never raises precision.
    for (const auto& g : gold.terms()) {
      TermSet more = pred;
      more.insert(g);
      CHECK(evaluate(more, gold).recall >= m.recall);
      break;
    }
    TermSet noisy = pred;
    noisy.insert("not-in-gold");
    auto n = evaluate(noisy, gold);
    CHECK(n.recall == m.recall);
    if (!pred.empty()) {
      CHECK(n.precision <= m.precision);
    }
  }
}

TEST_CASE("per-domain recall examples") {
  TermSet gold;
  gold.insert("cheap", "restaurant");
  gold.insert("cheap", "hotel");
  gold.insert("parking", "hotel");
  gold.insert("museum", "attraction");

  auto all = per_domain_recall(terms({"cheap", "parking", "museum"}), gold);
  for (const auto& [d, r] : all.recall_by_domain) CHECK(r == 1.0);

  auto some = per_domain_recall(terms({"cheap"}), gold);
  CHECK(some.recall_by_domain.at("restaurant") == 1.0);
  CHECK(some.recall_by_domain.at("hotel") == 0.5);
  CHECK(some.recall_by_domain.at("attraction") == 0.0);
  CHECK(some.found_count_by_domain.at("restaurant") + some.found_count_by_domain.at("hotel") == 2);

  // Gold-count-weighted mean of domain recalls equals the expanded-multiset recall.
  double weighted = 0;
  std::size_t expanded = 0;
  for (const auto& [d, n] : some.gold_count_by_domain) {
    weighted += some.recall_by_domain.at(d) * double(n);
    expanded += n;
  }
  CHECK(weighted / double(expanded) == doctest::Approx(2.0 / 4.0));
}

TEST_CASE("seen/unseen split examples") {
  auto tp = terms({"a", "b", "c", "d"});
  auto all_seen = seen_unseen_split(tp, terms({"a", "b", "c", "d", "e"}));
  CHECK(all_seen.defined);
  CHECK(all_seen.seen_fraction == 1.0);
  CHECK(all_seen.unseen_fraction == 0.0);

  auto none_seen = seen_unseen_split(tp, terms({"x"}));
  CHECK(none_seen.seen_fraction == 0.0);
  CHECK(none_seen.unseen_fraction == 1.0);

  auto quarter = seen_unseen_split(tp, terms({"a", "z"}));
  CHECK(quarter.seen_fraction == 0.25);
  CHECK(quarter.unseen_fraction == 0.75);

  auto undefined = seen_unseen_split(TermSet{}, terms({"a"}));
  CHECK_FALSE(undefined.defined);
  CHECK(to_json(undefined)["seen"].is_null());
}

TEST_CASE("overlap report examples") {
  auto gold = terms({"a", "b", "c", "d"});
  auto same = overlap_report({{"m1", terms({"a", "b"})}, {"m2", terms({"a", "b"})}}, gold);
  CHECK(region(same, {"m1"}).exclusive_count == 0);
  CHECK(region(same, {"m2"}).exclusive_count == 0);
  CHECK(region(same, {"m1", "m2"}).intersection_count == 2);

  auto disjoint = overlap_report({{"m1", terms({"a"})}, {"m2", terms({"b", "x"})}}, gold);
  CHECK(region(disjoint, {"m1", "m2"}).intersection_count == 0);
  CHECK(disjoint.true_positive_sets.at("m2").size() == 1);

  auto three = overlap_report({{"x", terms({"a", "b"})}, {"y", terms({"b", "c"})}, {"z", terms({"b"})}}, gold);
  CHECK(region(three, {"x", "y", "z"}).exclusive_count == 1);
  CHECK(region(three, {"x"}).exclusive_count == 1);
  CHECK(region(three, {"y"}).exclusive_count == 1);
  CHECK(region(three, {"z"}).exclusive_count == 0);
  CHECK(three.regions.size() == 7);
  CHECK(three.union_count == 3);
}

TEST_CASE("overlap report needs 2 to 5 models") {
  std::map<std::string, TermSet> models;
  models["a"] = terms({"a"});
  CHECK_THROWS_AS(overlap_report(models, terms({"a"})), ValidationError);
  for (const char* id : {"b", "c", "d", "e"}) models[id] = terms({"a"});
  CHECK_NOTHROW(overlap_report(models, terms({"a"})));
  models["f"] = terms({"a"});
  CHECK_THROWS_AS(overlap_report(models, terms({"a"})), ValidationError);
}

TEST_CASE("overlap regions are consistent with the union and inclusion-exclusion") {
  std::mt19937_64 rng(12);
  std::bernoulli_distribution coin(0.35);
  TermSet gold;
  for (int i = 0; i < 40; ++i) gold.insert("g" + std::to_string(i));
  for (int t = 0; t < 50; ++t) {
    std::size_t k = 2 + t % 4;
    std::map<std::string, TermSet> models;
    for (std::size_t m = 0; m < k; ++m) {
      TermSet s;
      for (int i = 0; i < 50; ++i) {
        if (coin(rng)) s.insert((i < 40 ? "g" : "n") + std::to_string(i));
      }
      models["m" + std::to_string(m)] = s;
    }
    auto r = overlap_report(models, gold);
    std::set<std::string> uni;
    for (const auto& [id, s] : r.true_positive_sets) uni.insert(s.terms().begin(), s.terms().end());
    std::size_t exclusive_sum = 0;
    long long inclusion_exclusion = 0;
    for (const auto& reg : r.regions) {
      exclusive_sum += reg.exclusive_count;
      long long sign = reg.members.size() % 2 ? 1 : -1;
      inclusion_exclusion += sign * static_cast<long long>(reg.intersection_count);
    }
    CHECK(exclusive_sum == uni.size());
    CHECK(r.union_count == uni.size());
    CHECK(inclusion_exclusion == static_cast<long long>(uni.size()));
  }
}
