#include "oracle_check.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "batteries.hpp"
#include "oracles.hpp"
#include "topoterm/embedding_store.hpp"

namespace topoterm {

namespace {

constexpr std::size_t kVocabularyProbes = 5;
constexpr std::size_t kSubsetPoints = 10;

oracle::BatteryResult vocabulary_checks(const PipelineConfig& cfg) {
  oracle::BatteryResult r;
  r.name = "oracles on vocabulary neighborhoods";
  try {
    const EmbeddingMatrix vocab = load_embeddings(cfg.paths.embeddings);
    const std::size_t probes = std::min(kVocabularyProbes, vocab.size());
    const double maxf = cfg.features.max_filtration;
    for (std::size_t w = 0; w < probes; ++w) {
      const std::string& word = vocab.word(w);
      const auto nb = neighborhood(vocab, word, cfg.features.neighborhood_size);
      const auto dgm = vr_persistence(nb.distances, maxf);

      std::vector<double> deaths;
      for (const auto& p : dgm.h0) deaths.push_back(p.death);
      std::sort(deaths.begin(), deaths.end());
      if (deaths != oracle::kruskal_weights(nb.distances, maxf)) {
        r.detail = "H0 of '" + word + "' differs from Kruskal";
        return r;
      }
      if (codensity_vector(nb) != oracle::sorted_codensity(nb.distances, nb.center_index)) {
        r.detail = "codensity of '" + word + "' differs from the sort oracle";
        return r;
      }
      std::vector<std::size_t> keep(kSubsetPoints);
      for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
      std::vector<double> sub;
      for (std::size_t i : keep) {
        for (std::size_t j : keep) sub.push_back(nb.distances(i, j));
      }
      const DistanceMatrix small(kSubsetPoints, std::move(sub));
      auto fast = vr_persistence(small, maxf);
      auto slow = brute_force_persistence(small, maxf);
      fast.canonicalize();
      slow.canonicalize();
      if (!(fast == slow)) {
        r.detail = "persistence of the first " + std::to_string(kSubsetPoints) + " neighbors of '" + word +
                   "' differs from full reduction";
        return r;
      }
      const ImageParams params = cfg.features.image;
      const auto got = persistence_image_grid(dgm.h1, params.h1, params.variance);
      const auto want = oracle::quadrature_image(dgm.h1, params.h1, params.variance);
      for (std::size_t k = 0; k < got.size(); ++k) {
        if (std::abs(got[k] - want[k]) > 1e-3 * std::abs(want[k]) + 1e-280) {
          r.detail = "H1 image pixel " + std::to_string(k) + " of '" + word + "' differs from quadrature";
          return r;
        }
      }
      const double norm = wasserstein_norm(dgm.h1);
      const double ref = dgm.h1.size() <= 6 ? oracle::exhaustive_wasserstein(dgm.h1, {}, 1.0)
                                            : wasserstein_distance(dgm.h1, {}, 1.0);
      if (std::abs(norm - ref) > 1e-9) {
        r.detail = "Wasserstein norm of '" + word + "' differs from the matching oracle";
        return r;
      }
    }
    r.passed = true;
    r.detail = std::to_string(probes) + " words";
  } catch (const std::exception& e) {
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

}  // namespace

int oracle_check(const PipelineConfig* cfg, std::uint64_t seed, std::ostream& out) {
  auto results = oracle::run_all_batteries(seed);
  if (cfg != nullptr) results.push_back(vocabulary_checks(*cfg));
  int failures = 0;
  for (const auto& r : results) {
    out << (r.passed ? "ok   " : "FAIL ") << r.name << ": " << r.detail << "\n";
    if (!r.passed) ++failures;
  }
  return failures;
}

}  // namespace topoterm
