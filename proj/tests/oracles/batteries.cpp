#include "batteries.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "topoterm/embedding_store.hpp"
#include "topoterm/evaluation.hpp"
#include "topoterm/tagger/decode.hpp"

namespace topoterm::oracle {

namespace {

template <typename F>
BatteryResult timed(std::string name, F&& body) {
  BatteryResult r;
  r.name = std::move(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

BatteryResult persistence_battery(std::uint64_t seed, std::size_t cases) {
  return timed("persistence vs full reduction", [&](BatteryResult& r) {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> size(3, 10);
    for (std::size_t c = 0; c < cases; ++c) {
      const auto d = random_distance_matrix(size(rng), rng);
      auto fast = vr_persistence(d, 1.0);
      auto slow = brute_force_persistence(d, 1.0);
      fast.canonicalize();
      slow.canonicalize();
      if (!(fast == slow)) {
        r.detail = "mismatch on case " + std::to_string(c) + " (" + std::to_string(d.size()) + " points)";
        return;
      }
    }
    r.passed = true;
    r.detail = std::to_string(cases) + " matrices";
  });
}

BatteryResult square_triangle_battery() {
  return timed("unit square and triangle", [](BatteryResult& r) {
    const std::vector<std::pair<double, double>> square = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const auto sq = vr_persistence(euclidean_matrix(square), 2.0);
    if (sq.h1.size() != 1) {
      r.detail = "square: expected one H1 pair, got " + std::to_string(sq.h1.size());
      return;
    }
    const double eb = std::abs(sq.h1[0].birth - 1.0);
    const double ed = std::abs(sq.h1[0].death - std::numbers::sqrt2);
    if (eb > 1e-12 || ed > 1e-12) {
      r.detail = "square: H1 = (" + fmt(sq.h1[0].birth) + ", " + fmt(sq.h1[0].death) + ")";
      return;
    }
    const std::vector<std::pair<double, double>> tri = {{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2.0}};
    const auto t = vr_persistence(euclidean_matrix(tri), 2.0);
    if (!t.h1.empty() || t.essential_h1 != 0) {
      r.detail = "triangle: H1 not empty";
      return;
    }
    r.passed = true;
    r.detail = "square H1 (" + fmt(sq.h1[0].birth) + ", " + fmt(sq.h1[0].death) + "), triangle H1 empty";
  });
}

BatteryResult mst_battery(std::uint64_t seed, std::size_t cases) {
  return timed("H0 deaths vs Kruskal", [&](BatteryResult& r) {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> size(2, 40);
    for (std::size_t c = 0; c < cases; ++c) {
      const auto d = random_distance_matrix(size(rng), rng);
      const auto expected = kruskal_weights(d, 1.0);
      for (const auto& h0 : {vr_persistence(d, 1.0).h0, h0_via_mst(d, 1.0).pairs}) {
        std::vector<double> deaths;
        for (const auto& p : h0) deaths.push_back(p.death);
        std::sort(deaths.begin(), deaths.end());
        if (deaths != expected) {
          r.detail = "mismatch on case " + std::to_string(c);
          return;
        }
      }
    }
    r.passed = true;
    r.detail = std::to_string(cases) + " matrices";
  });
}

BatteryResult wasserstein_battery(std::uint64_t seed, std::size_t cases) {
  return timed("Wasserstein vs exhaustive matching", [&](BatteryResult& r) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t c = 0; c < cases; ++c) {
      const auto a = random_pairs(6, rng);
      const auto b = random_pairs(6, rng);
      const double norm = wasserstein_norm(a);
      const double norm_ref = exhaustive_wasserstein(a, {}, 1.0);
      const double dist = wasserstein_distance(a, b, 1.0);
      const double dist_ref = exhaustive_wasserstein(a, b, 1.0);
      const double dist2 = wasserstein_distance(a, b, 2.0);
      const double dist2_ref = exhaustive_wasserstein(a, b, 2.0);
      worst = std::max({worst, std::abs(norm - norm_ref), std::abs(dist - dist_ref), std::abs(dist2 - dist2_ref)});
      if (worst > 1e-9) {
        r.detail = "case " + std::to_string(c) + " deviates by " + fmt(worst);
        return;
      }
    }
    // Large diagrams: the solver's matching must admit no improving cycle,
    // and distance to the empty diagram must equal the norm.
    for (int c = 0; c < 3; ++c) {
      const auto a = random_pairs(200, rng, 150);
      const auto b = random_pairs(200, rng, 150);
      const std::size_t n = a.size() + b.size();
      std::vector<double> cost(n * n, 0.0);
      auto diag = [](const PersistencePair& p) { return (p.death - p.birth) / std::numbers::sqrt2; };
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double v = 0.0;
          if (i < a.size() && j < b.size()) {
            v = std::hypot(a[i].birth - b[j].birth, a[i].death - b[j].death);
          } else if (i < a.size()) {
            v = diag(a[i]);
          } else if (j < b.size()) {
            v = diag(b[j]);
          }
          cost[i * n + j] = v;
        }
      }
      const auto assignment = solve_assignment(cost, n);
      if (!assignment_is_optimal(cost, n, assignment, 1e-12)) {
        r.detail = "assignment on " + std::to_string(n) + " nodes is not optimal";
        return;
      }
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += cost[i * n + assignment[i]];
      const double solved = wasserstein_distance(a, b, 1.0);
      const double to_empty = std::abs(wasserstein_distance(a, {}, 1.0) - wasserstein_norm(a));
      if (std::abs(solved - total) > 1e-9 || to_empty > 1e-9) {
        r.detail = "200-point consistency check failed";
        return;
      }
    }
    bool rejected = false;
    try {
      const auto big = random_pairs(201, rng, 201);
      wasserstein_distance(big, {}, 1.0);
    } catch (const std::exception&) {
      rejected = true;
    }
    if (!rejected) {
      r.detail = "201-point diagram was not rejected";
      return;
    }
    r.passed = true;
    r.detail = std::to_string(cases) + " diagrams, max deviation " + fmt(worst);
  });
}

BatteryResult image_battery(std::uint64_t seed, std::size_t single, std::size_t multi) {
  return timed("persistence image vs quadrature", [&](BatteryResult& r) {
    Rng rng(seed);
    const ImageParams params;
    std::uniform_real_distribution<double> birth(0.0, 1.0), life(1e-3, 0.3), life0(1e-3, 1.0);
    double worst = 0.0;
    auto check = [&](std::span<const PersistencePair> pairs, const ImageGrid& grid) {
      const auto got = persistence_image_grid(pairs, grid, params.variance);
      const auto want = quadrature_image(pairs, grid, params.variance);
      for (std::size_t k = 0; k < got.size(); ++k) {
        const double err = std::abs(got[k] - want[k]);
        if (err > 1e-3 * std::abs(want[k]) + 1e-280) return false;
        if (want[k] > 1e-280) worst = std::max(worst, err / want[k]);
      }
      return true;
    };
    ImageGrid h0_column = params.h0;
    h0_column.birth_max = params.h0.birth_edge(1);
    h0_column.birth_bins = 1;

    for (std::size_t c = 0; c < single + multi; ++c) {
      const std::size_t count = c < single ? 1 : 2 + c % 4;
      std::vector<PersistencePair> h1, h0;
      for (std::size_t k = 0; k < count; ++k) {
        const double b = birth(rng);
        h1.push_back({b, b + life(rng)});
        h0.push_back({0.0, life0(rng)});
      }
      if (!check(h1, params.h1) || !check(h0, h0_column)) {
        r.detail = "pixel outside tolerance on diagram " + std::to_string(c);
        return;
      }
      // Additivity: the image of a union is the sum of the images.
      if (count > 1) {
        const std::span<const PersistencePair> all(h1);
        const auto whole = persistence_image_grid(all, params.h1, params.variance);
        auto left = persistence_image_grid(all.first(1), params.h1, params.variance);
        const auto right = persistence_image_grid(all.subspan(1), params.h1, params.variance);
        for (std::size_t k = 0; k < whole.size(); ++k) {
          if (std::abs(whole[k] - (left[k] + right[k])) > 1e-9) {
            r.detail = "additivity fails on diagram " + std::to_string(c);
            return;
          }
        }
      }
    }
    r.passed = true;
    r.detail = std::to_string(single) + "+" + std::to_string(multi) + " diagrams, max rel error " + fmt(worst);
  });
}

BatteryResult codensity_battery(std::uint64_t seed, std::size_t cases) {
  return timed("codensity vs full sort", [&](BatteryResult& r) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t c = 0; c < cases; ++c) {
      EmbeddingMatrix vocab(8);
      for (int w = 0; w < 60; ++w) {
        std::vector<float> v(8);
        for (auto& x : v) x = static_cast<float>(g(rng));
        vocab.add("w" + std::to_string(w), v);
      }
      const auto nb = neighborhood(vocab, "w" + std::to_string(c % 60), 50);
      const auto got = codensity_vector(nb);
      if (got != sorted_codensity(nb.distances, nb.center_index)) {
        r.detail = "mismatch on neighborhood " + std::to_string(c);
        return;
      }
      if (!std::is_sorted(got.begin(), got.end())) {
        r.detail = "not monotone on neighborhood " + std::to_string(c);
        return;
      }
    }
    EmbeddingMatrix flat(8);
    for (int w = 0; w < 50; ++w) flat.add("same" + std::to_string(w), std::vector<float>(8, 0.25f));
    const auto zero = codensity_vector(neighborhood(flat, "same0", 50));
    for (double v : zero) {
      if (v != 0.0) {
        r.detail = "degenerate cloud gives nonzero codensity";
        return;
      }
    }
    r.passed = true;
    r.detail = std::to_string(cases) + " neighborhoods";
  });
}

BatteryResult matcher_battery(std::uint64_t seed, std::size_t layouts) {
  return timed("matcher fixtures and BIO round trip", [&](BatteryResult& r) {
    const std::vector<std::string> an_expensive = {"an", "expensive"};
    const std::vector<std::string> pizza = {"Pizza", "Hut"};
    const std::vector<std::string> pizza_gold = {"Pizza", "Hut", "Cherry", "Hinton"};
    TermSet gold;
    gold.insert("expensive");
    gold.insert(normalize_term(pizza_gold));
    TermSet pred;
    pred.insert(normalize_term(an_expensive));
    pred.insert(normalize_term(pizza));
    const auto m = evaluate(pred, gold);
    const auto tp = true_positives(pred, gold);
    if (!tp.contains("expensive") || tp.contains("pizza hut") || m.true_positives != 1 ||
        m.false_positives != 1) {
      r.detail = "strict matcher fixture failed";
      return;
    }
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> len(0, 30);
    for (std::size_t c = 0; c < layouts; ++c) {
      Utterance u;
      u.utt_id = "layout" + std::to_string(c);
      u.tokens.resize(len(rng), "tok");
      const auto spans = random_span_layout(u.tokens.size(), rng);
      for (const auto& s : spans) u.spans.push_back({s.start, s.end, "v", "d", "s"});
      if (decode_spans(bio_labels(u)) != spans) {
        r.detail = "round trip fails on layout " + std::to_string(c);
        return;
      }
    }
    r.passed = true;
    r.detail = "fixtures ok, " + std::to_string(layouts) + " layouts";
  });
}

std::vector<BatteryResult> run_all_batteries(std::uint64_t seed) {
  return {persistence_battery(seed),     square_triangle_battery(), mst_battery(seed + 1),
          wasserstein_battery(seed + 2), image_battery(seed + 3),   codensity_battery(seed + 4),
          matcher_battery(seed + 5)};
}

}  // namespace topoterm::oracle
