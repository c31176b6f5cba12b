#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "support.hpp"
#include "topoterm/embedding_store.hpp"
#include "topoterm/error.hpp"

using namespace topoterm;

namespace {

EmbeddingMatrix toy_vocab() {
  return parse_embeddings(
      "DIM\t2\n"
      "north\t1 0\n"
      "south\t-1 0.1\n"
      "east\t0.6 0.8\n"
      "west\t0.8 0.6\n"
      "up\t0 1\n");
}

// Reference cosine distance in the textbook form.
double plain_cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  return 1.0 - dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("parse_embeddings loads a 3x4 file") {
  auto m = parse_embeddings("DIM\t4\na\t1 0 0 0\nb\t0 1 0 0\nc\t0 0 1 0.5\n");
  CHECK(m.size() == 3);
  CHECK(m.dim() == 4);
  CHECK(m.find("b") == std::optional<std::size_t>(1));
  CHECK_FALSE(m.contains("d"));
  CHECK(m.row(2)[3] == doctest::Approx(0.5));
}

TEST_CASE("parse_embeddings rejects malformed rows") {
  std::string header = "DIM\t384\n";
  std::string short_row = "w\t";
  for (int i = 0; i < 383; ++i) short_row += (i ? " " : "") + std::string("0.5");
  try {
    parse_embeddings(header + short_row + "\n", "e.tsv");
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("e.tsv:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_embeddings("DIM\t2\na\t1 0\na\t0 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_embeddings("DIM\t2\nz\t0 0\n"), ValidationError);
  CHECK_THROWS_AS(parse_embeddings("a\t1 0\n"), ParseError);
}

TEST_CASE("embedding files round-trip") {
  test::TempDir dir("emb");
  auto m = toy_vocab();
  write_embeddings(dir / "v.tsv", m);
  auto back = load_embeddings(dir / "v.tsv");
  REQUIRE(back.size() == m.size());
  for (std::size_t r = 0; r < m.size(); ++r) {
    CHECK(back.word(r) == m.word(r));
    for (std::size_t c = 0; c < m.dim(); ++c) CHECK(back.row(r)[c] == m.row(r)[c]);
  }
}

TEST_CASE("cosine_distance examples") {
  std::vector<double> u{0.3, -1.2, 2.5}, neg{-0.3, 1.2, -2.5};
  CHECK(cosine_distance(u, u) == 0.0);
  CHECK(cosine_distance(u, neg) == doctest::Approx(2.0).epsilon(1e-15));
  std::vector<double> x{1, 0}, y{0, 1};
  CHECK(cosine_distance(x, y) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> zero{0, 0};
  CHECK_THROWS_AS(cosine_distance(x, zero), ValidationError);
}

TEST_CASE("cosine_distance agrees with the textbook form and stays in range") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  for (int t = 0; t < 500; ++t) {
    std::vector<float> a(16), b(16);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    double d = cosine_distance(std::span<const float>(a), std::span<const float>(b));
    CHECK(d >= 0.0);
    CHECK(d <= 2.0);
    CHECK(d == doctest::Approx(plain_cosine(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("neighborhood of size 1 is the word itself") {
  auto m = toy_vocab();
  auto nb = neighborhood(m, "east", 1);
  CHECK(nb.member_words == std::vector<std::string>{"east"});
  CHECK(nb.distances.size() == 1);
  CHECK(nb.distances(0, 0) == 0.0);
  CHECK(nb.center_index == 0);
}

TEST_CASE("neighborhood members match an exhaustive distance sort") {
  auto m = toy_vocab();
  for (std::size_t q = 0; q < m.size(); ++q) {
    for (std::size_t n = 1; n <= m.size(); ++n) {
      std::vector<std::size_t> order(m.size());
      std::iota(order.begin(), order.end(), 0);
      std::vector<double> dist(m.size());
      for (std::size_t r = 0; r < m.size(); ++r) dist[r] = r == q ? -1.0 : plain_cosine(m.row(q), m.row(r));
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist[a] < dist[b]; });
      std::set<std::string> expected;
      for (std::size_t i = 0; i < n; ++i) expected.insert(m.word(order[i]));

      auto nb = neighborhood(m, m.word(q), n);
      CHECK(std::set<std::string>(nb.member_words.begin(), nb.member_words.end()) == expected);
      CHECK(nb.member_words[nb.center_index] == m.word(q));
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(nb.distances(i, i) == 0.0);
        for (std::size_t j = 0; j < n; ++j) {
          CHECK(nb.distances(i, j) == nb.distances(j, i));
          CHECK(nb.distances(i, j) <= 2.0);
        }
      }
    }
  }
}

TEST_CASE("neighborhood is k-NN optimal on random vocabularies") {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> g;
  EmbeddingMatrix m(8);
  for (int r = 0; r < 120; ++r) {
    std::vector<float> v(8);
    for (auto& x : v) x = g(rng);
    m.add("w" + std::to_string(r), v);
  }
  for (std::size_t q : {0u, 17u, 63u, 119u}) {
    auto nb = neighborhood(m, m.word(q), 20);
    std::set<std::string> members(nb.member_words.begin(), nb.member_words.end());
    double worst_in = 0.0;
    for (std::size_t i = 0; i < nb.size(); ++i) worst_in = std::max(worst_in, nb.distances(nb.center_index, i));
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (members.contains(m.word(r))) continue;
      CHECK(cosine_distance(m.row(q), m.row(r)) >= worst_in - 1e-12);
    }
    CHECK(neighborhood(m, m.word(q), 20).member_words == nb.member_words);
  }
}

TEST_CASE("neighborhood ties go to the lower vocabulary row") {
  auto m = parse_embeddings("DIM\t2\nq\t1 0\nfar\t-1 0\nb\t0 1\na\t0 -1\nc\t0 2\n");
  auto nb = neighborhood(m, "q", 3);
  CHECK(std::set<std::string>(nb.member_words.begin(), nb.member_words.end()) ==
        std::set<std::string>{"q", "b", "a"});
}

TEST_CASE("neighborhood falls back to the OOV file and reports missing words") {
  auto m = toy_vocab();
  auto oov = parse_embeddings("DIM\t2\nnortheast\t0.7 0.7\n");
  auto nb = neighborhood(m, "northeast", 3, &oov);
  CHECK(nb.member_words[nb.center_index] == "northeast");
  CHECK(std::set<std::string>(nb.member_words.begin(), nb.member_words.end()) ==
        std::set<std::string>{"northeast", "east", "west"});

  try {
    neighborhood(m, "nowhere", 2, &oov);
    FAIL("expected MissingEmbedding");
  } catch (const MissingEmbedding& e) {
    CHECK(e.word() == "nowhere");
  }
  CHECK_THROWS_AS(neighborhood(m, "north", 0), ValidationError);
}
