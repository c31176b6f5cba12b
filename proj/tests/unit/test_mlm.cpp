#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "support.hpp"
#include "topoterm/contextual.hpp"
#include "topoterm/error.hpp"
#include "topoterm/mlm.hpp"

using namespace topoterm;

TEST_CASE("mlm score examples") {
  MlmScoreTable one;
  one.add({"u", 0, "w", 0.0});
  CHECK(one.score_of("w") == 1.0);

  auto table = aggregate_mlm_scores(std::vector<TokenProbabilityRecord>{{"a", 0, "x", 0.2}, {"b", 3, "x", 0.4}});
  CHECK(table.score_of("x") == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(table.occurrence_count("x") == 2);
}

TEST_CASE("mlm scores reject probabilities outside [0, 1]") {
  MlmScoreTable t;
  CHECK_THROWS_AS(t.add({"u7", 2, "w", 1.5}), ValidationError);
  CHECK_THROWS_AS(t.add({"u7", 2, "w", -0.1}), ValidationError);
  try {
    t.add({"u7", 2, "w", 2.0});
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("u7") != std::string::npos);
  }
}

TEST_CASE("unseen and case-variant words get the default score") {
  MlmScoreTable t;
  t.add({"u", 0, "cheap", 0.04});
  CHECK(t.score_of("cheap") == doctest::Approx(0.96));
  CHECK(t.score_of("Cheap") == 0.5);
  CHECK(t.score_of("never") == 0.5);
  CHECK_FALSE(t.contains("Cheap"));
}

TEST_CASE("aggregation is exactly independent of record order") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<TokenProbabilityRecord> recs;
  for (int i = 0; i < 2000; ++i) recs.push_back({"u", std::size_t(i), "w" + std::to_string(i % 7), u(rng)});
  auto base = aggregate_mlm_scores(recs);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(recs.begin(), recs.end(), rng);
    auto other = aggregate_mlm_scores(recs);
    for (const auto& w : base.words()) {
      CHECK(other.score_of(w) == base.score_of(w));
      CHECK(other.score_of(w) >= 0.0);
      CHECK(other.score_of(w) <= 1.0);
    }
  }
}

TEST_CASE("exact sum is correctly rounded") {
  ExactSum s;
  for (double x : {1e100, 1.0, -1e100, 1e-20}) s.add(x);
  CHECK(s.value() == 1.0 + 1e-20);
  ExactSum tenths;
  for (int i = 0; i < 10; ++i) tenths.add(0.1);
  CHECK(tenths.value() == 1.0);
}

TEST_CASE("score tables round-trip through TSV") {
  test::TempDir dir("mlm");
  auto table = aggregate_mlm_scores(
      std::vector<TokenProbabilityRecord>{{"a", 0, "the", 0.41}, {"a", 1, "cheap", 0.04}, {"b", 0, "the", 0.3}});
  table.save_tsv(dir / "s.tsv");
  auto back = MlmScoreTable::load_tsv(dir / "s.tsv");
  CHECK(back.words() == table.words());
  for (const auto& w : table.words()) {
    CHECK(back.score_of(w) == table.score_of(w));
    CHECK(back.occurrence_count(w) == table.occurrence_count(w));
  }
  std::ofstream(dir / "bad.tsv") << "the\t1.7\t2\n";
  CHECK_THROWS_AS(MlmScoreTable::load_tsv(dir / "bad.tsv"), ValidationError);
}

TEST_CASE("probability JSONL parsing") {
  std::vector<std::string> toks{"i", "want", "cheap", "food"};
  std::vector<double> p{0.9, 0.5, 0.04, 0.3};
  auto line = probability_record_json("u1", toks, p);
  auto recs = parse_probability_records(line + "\n" + line);
  REQUIRE(recs.size() == 8);
  CHECK(recs[2].word == "cheap");
  CHECK(recs[2].token_index == 2);
  CHECK(recs[2].p_mask == 0.04);
  CHECK(aggregate_mlm_scores(recs).score_of("cheap") == doctest::Approx(0.96));

  CHECK_THROWS_AS(parse_probability_records(R"({"utt_id":"x","tokens":["a"],"p_mask":[0.1,0.2]})"), ParseError);
  try {
    parse_probability_records(line + "\nnot json", "p.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("p.jsonl:2") != std::string::npos);
  }
}

TEST_CASE("contextual store round-trips and rejects foreign files") {
  test::TempDir dir("ctx");
  ContextualStore store(4);
  store.add("u1", {1, 2, 3, 4, 5, 6, 7, 8});
  store.add("u2", {0.5f, 0, 0, -1});
  store.save(dir / "c.bin");
  auto back = ContextualStore::load(dir / "c.bin");
  CHECK(back.dim() == 4);
  CHECK(back.size() == 2);
  auto t = back.token("u1", 1);
  REQUIRE(t.has_value());
  CHECK(std::vector<float>(t->begin(), t->end()) == std::vector<float>{5, 6, 7, 8});
  CHECK_FALSE(back.token("u1", 2).has_value());
  CHECK_FALSE(back.token("u3", 0).has_value());
  CHECK_THROWS_AS(store.add("u3", {1, 2, 3}), ValidationError);

  std::ofstream(dir / "bad.bin") << "XXXXjunk";
  CHECK_THROWS_AS(ContextualStore::load(dir / "bad.bin"), ParseError);
}
