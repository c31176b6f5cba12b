#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "topoterm/error.hpp"
#include "topoterm/persistence.hpp"

using namespace topoterm;

namespace {

PersistenceDiagram canonical(PersistenceDiagram d) {
  d.canonicalize();
  return d;
}

std::vector<double> deaths(const std::vector<PersistencePair>& pairs) {
  std::vector<double> out;
  for (const auto& p : pairs) out.push_back(p.death);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("DistanceMatrix validates its entries") {
  CHECK_THROWS_AS(DistanceMatrix(2, {0, 1, 2, 0}), ValidationError);
  CHECK_THROWS_AS(DistanceMatrix(2, {0.1, 1, 1, 0}), ValidationError);
  CHECK_THROWS_AS(DistanceMatrix(2, {0, -1, -1, 0}), ValidationError);
  CHECK_THROWS_AS(DistanceMatrix(2, {0, 1, 1}), ValidationError);
  CHECK_NOTHROW(DistanceMatrix(2, {0, 1, 1, 0}));
}

TEST_CASE("two points merge once") {
  auto dg = vr_persistence(DistanceMatrix(2, {0, 0.4, 0.4, 0}), 1.0);
  REQUIRE(dg.h0.size() == 1);
  CHECK(dg.h0[0] == PersistencePair{0.0, 0.4});
  CHECK(dg.h1.empty());
  CHECK(dg.essential_h0 == 1);
}

TEST_CASE("edge cases of the point count") {
  CHECK_THROWS_AS(vr_persistence(DistanceMatrix(0, {})), ValidationError);
  auto single = vr_persistence(DistanceMatrix(1, {0.0}));
  CHECK(single.h0.empty());
  CHECK(single.h1.empty());
  CHECK(single.essential_h0 == 1);
  auto brute = brute_force_persistence(DistanceMatrix(1, {0.0}));
  CHECK(brute.essential_h0 == 1);
  CHECK(brute.h0.empty());
  CHECK_THROWS_AS(vr_persistence(DistanceMatrix(2, {0, 1, 1, 0}), 0.0), ValidationError);
}

TEST_CASE("collinear points spaced 0.2") {
  auto d = DistanceMatrix(3, {0, 0.2, 0.4, 0.2, 0, 0.2, 0.4, 0.2, 0});
  auto mst = h0_via_mst(d);
  CHECK(deaths(mst.pairs) == std::vector<double>{0.2, 0.2});
  CHECK(mst.essential == 1);
  CHECK(deaths(vr_persistence(d).h0) == std::vector<double>{0.2, 0.2});
}

TEST_CASE("unit square has one loop") {
  std::vector<std::pair<double, double>> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  auto d = oracle::euclidean_matrix(pts);
  for (auto dg : {vr_persistence(d, 2.0), brute_force_persistence(d, 2.0)}) {
    REQUIRE(dg.h1.size() == 1);
    CHECK(std::abs(dg.h1[0].birth - 1.0) <= 1e-12);
    CHECK(std::abs(dg.h1[0].death - std::sqrt(2.0)) <= 1e-12);
    CHECK(deaths(dg.h0) == std::vector<double>{1.0, 1.0, 1.0});
  }
  // At max_filtration 1 the loop never dies and is counted, not listed.
  auto clipped = vr_persistence(d, 1.0);
  CHECK(clipped.h1.empty());
  CHECK(clipped.essential_h1 == 1);
}

TEST_CASE("equilateral triangle fills at its side length") {
  const double s = 0.37;
  auto d = DistanceMatrix(3, {0, s, s, s, 0, s, s, s, 0});
  for (auto dg : {vr_persistence(d), brute_force_persistence(d)}) {
    CHECK(canonical(dg).h0 == std::vector<PersistencePair>{{0, s}, {0, s}});
    CHECK(dg.h1.empty());
  }
}

TEST_CASE("brute force refuses large inputs") {
  oracle::Rng rng(1);
  CHECK_NOTHROW(brute_force_persistence(oracle::random_distance_matrix(12, rng)));
  CHECK_THROWS_AS(brute_force_persistence(oracle::random_distance_matrix(13, rng)), ValidationError);
}

TEST_CASE("random 8-point clouds match the brute-force reduction exactly") {
  oracle::Rng rng(99);
  for (int t = 0; t < 100; ++t) {
    auto d = oracle::random_distance_matrix(8, rng);
    auto fast = canonical(vr_persistence(d, 1.0));
    auto slow = canonical(brute_force_persistence(d, 1.0));
    CHECK(fast.h0 == slow.h0);
    CHECK(fast.h1 == slow.h1);
    CHECK(fast.essential_h0 == slow.essential_h0);
  }
}

TEST_CASE("diagram invariants hold on random clouds") {
  oracle::Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::size_t n = 3 + t % 20;
    auto d = oracle::random_distance_matrix(n, rng);
    const double maxf = 0.6;
    auto dg = vr_persistence(d, maxf);
    for (const auto& p : dg.h0) {
      CHECK(p.birth == 0.0);
      CHECK(p.death > 0.0);
      CHECK(p.death <= maxf);
    }
    for (const auto& p : dg.h1) {
      CHECK(p.birth >= 0.0);
      CHECK(p.birth < p.death);
      CHECK(p.death <= maxf);
    }
    CHECK(dg.h0.size() + dg.essential_h0 == n);
    CHECK(deaths(dg.h0) == oracle::kruskal_weights(d, maxf));
  }
}

TEST_CASE("scaling distances scales the diagram") {
  oracle::Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    auto d = oracle::random_distance_matrix(9, rng);
    const double lambda = 0.25;  // a power of two keeps the products exact
    auto base = canonical(vr_persistence(d, 0.8));
    auto scaled = canonical(vr_persistence(d.scaled(lambda), 0.8 * lambda));
    REQUIRE(base.h0.size() == scaled.h0.size());
    REQUIRE(base.h1.size() == scaled.h1.size());
    for (std::size_t i = 0; i < base.h0.size(); ++i) CHECK(scaled.h0[i].death == base.h0[i].death * lambda);
    for (std::size_t i = 0; i < base.h1.size(); ++i) {
      CHECK(scaled.h1[i].birth == base.h1[i].birth * lambda);
      CHECK(scaled.h1[i].death == base.h1[i].death * lambda);
    }
    CHECK(scaled.essential_h0 == base.essential_h0);
  }
}

TEST_CASE("relabeling points leaves the diagram unchanged") {
  oracle::Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    std::size_t n = 4 + t % 12;
    auto d = oracle::random_distance_matrix(n, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(canonical(vr_persistence(d)) == canonical(vr_persistence(d.permuted(perm))));
  }
}

TEST_CASE("raising max_filtration never removes a bar") {
  oracle::Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    auto d = oracle::random_distance_matrix(10, rng);
    auto low = canonical(vr_persistence(d, 0.3));
    auto high = canonical(vr_persistence(d, 0.9));
    CHECK(high.h0.size() >= low.h0.size());
    CHECK(high.h0.size() + high.essential_h0 == low.h0.size() + low.essential_h0);
    for (const auto& p : low.h0) CHECK(std::find(high.h0.begin(), high.h0.end(), p) != high.h0.end());
    CHECK(high.essential_h0 <= low.essential_h0);
    for (const auto& p : low.h1) CHECK(std::find(high.h1.begin(), high.h1.end(), p) != high.h1.end());
  }
}

TEST_CASE("diagram records round-trip") {
  PersistenceDiagram dg;
  dg.h0 = {{0, 0.125}, {0, 0.3}};
  dg.h1 = {{0.2, 0.4000000000000001}};
  dg.essential_h0 = 1;
  std::string word;
  auto back = parse_diagram_record(diagram_record_json("south", dg), &word);
  CHECK(word == "south");
  CHECK(back.h0 == dg.h0);
  CHECK(back.h1 == dg.h1);
  CHECK(back.essential_h0 == 1);
  CHECK_THROWS_AS(parse_diagram_record("{\"word\": 3}", &word), ParseError);
}
