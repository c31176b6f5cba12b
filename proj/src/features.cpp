#include "topoterm/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "topoterm/contextual.hpp"
#include "topoterm/error.hpp"
#include "topoterm/mlm.hpp"

namespace topoterm {

// ---------------------------------------------------------------------------
// Codensity

CodensityVector codensity_vector(const DistanceMatrix& d, std::size_t center) {
  const std::size_t needed = kCodensityOrders.back() + 1;
  if (d.size() < needed) {
    throw ValidationError("codensity needs a neighborhood of at least " + std::to_string(needed) +
                          " points, got " + std::to_string(d.size()));
  }
  std::vector<double> dist;
  dist.reserve(d.size() - 1);
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (j != center) dist.push_back(d(center, j));
  }
  std::sort(dist.begin(), dist.end());
  CodensityVector c{};
  for (std::size_t i = 0; i < kCodensityOrders.size(); ++i) c[i] = dist[kCodensityOrders[i] - 1];
  return c;
}

CodensityVector codensity_vector(const Neighborhood& nb) {
  return codensity_vector(nb.distances, nb.center_index);
}

// ---------------------------------------------------------------------------
// Wasserstein

namespace {

double diagonal_distance(const PersistencePair& p) {
  return (p.death - p.birth) / std::numbers::sqrt2;
}

}  // namespace

double wasserstein_norm(std::span<const PersistencePair> pairs) {
  double s = 0.0;
  for (const auto& p : pairs) s += diagonal_distance(p);
  return s;
}

WassersteinVector wasserstein_norm(const PersistenceDiagram& diagram) {
  return {wasserstein_norm(diagram.h0), wasserstein_norm(diagram.h1)};
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw ValidationError("assignment: cost matrix is not square");
  if (n == 0) return {};
  // Shortest augmenting paths with row/column potentials (1-based internally).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double wasserstein_distance(std::span<const PersistencePair> a, std::span<const PersistencePair> b,
                            double order, std::size_t max_points) {
  if (!(order >= 1.0)) throw ValidationError("wasserstein order must be >= 1");
  if (a.size() > max_points || b.size() > max_points) {
    throw ValidationError("wasserstein_distance: diagrams of " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()) + " points exceed the cap of " +
                          std::to_string(max_points) + "; subsample the diagrams first");
  }
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  if (n == 0) return 0.0;
  // Rows: points of a, then one diagonal slot per point of b.
  // Columns: points of b, then one diagonal slot per point of a.
  std::vector<double> cost(n * n, 0.0);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      cost[i * n + j] = std::pow(std::hypot(a[i].birth - b[j].birth, a[i].death - b[j].death), order);
    }
    const double to_diag = std::pow(diagonal_distance(a[i]), order);
    for (std::size_t j = nb; j < n; ++j) cost[i * n + j] = to_diag;
  }
  for (std::size_t i = na; i < n; ++i) {
    for (std::size_t j = 0; j < nb; ++j) cost[i * n + j] = std::pow(diagonal_distance(b[j]), order);
  }
  const auto assignment = solve_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + assignment[i]];
  return std::pow(total, 1.0 / order);
}

// ---------------------------------------------------------------------------
// Persistence images

double gaussian_interval_mass(double lo, double hi, double mean, double variance) {
  const double scale = std::sqrt(2.0 * variance);
  const double a = (lo - mean) / scale;
  const double b = (hi - mean) / scale;
  if (a >= 0.0) return 0.5 * (std::erfc(a) - std::erfc(b));
  if (b <= 0.0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
  return 0.5 * (std::erf(b) - std::erf(a));
}

std::vector<double> persistence_image_grid(std::span<const PersistencePair> pairs,
                                           const ImageGrid& grid, double variance) {
  std::vector<double> image(grid.birth_bins * grid.lifetime_bins, 0.0);
  std::vector<double> bx(grid.birth_bins), ly(grid.lifetime_bins);
  for (const auto& p : pairs) {
    const double life = p.lifetime();
    if (!(life > 0.0)) continue;
    for (std::size_t i = 0; i < grid.birth_bins; ++i) {
      bx[i] = gaussian_interval_mass(grid.birth_edge(i), grid.birth_edge(i + 1), p.birth, variance);
    }
    for (std::size_t j = 0; j < grid.lifetime_bins; ++j) {
      ly[j] = gaussian_interval_mass(grid.lifetime_edge(j), grid.lifetime_edge(j + 1), life, variance);
    }
    for (std::size_t i = 0; i < grid.birth_bins; ++i) {
      const double wx = life * bx[i];
      for (std::size_t j = 0; j < grid.lifetime_bins; ++j) image[i * grid.lifetime_bins + j] += wx * ly[j];
    }
  }
  return image;
}

PersistenceImage persistence_image(const PersistenceDiagram& diagram, const ImageParams& params) {
  PersistenceImage img;
  {
    // Only the first birth column of the H0 image is kept.
    ImageGrid first_column = params.h0;
    first_column.birth_max = params.h0.birth_edge(1);
    first_column.birth_bins = 1;
    img.h0_vector = persistence_image_grid(diagram.h0, first_column, params.variance);
  }
  img.h1_grid = persistence_image_grid(diagram.h1, params.h1, params.variance);
  return img;
}

// ---------------------------------------------------------------------------
// Bundles

namespace {

const WordFeatures& zero_features() {
  static const WordFeatures kZero{};
  return kZero;
}

}  // namespace

const PersistenceImage& TokenFeatures::pimage() const {
  return tda ? tda->pimage : zero_features().pimage;
}
const CodensityVector& TokenFeatures::codensity() const {
  return tda ? tda->codensity : zero_features().codensity;
}
const WassersteinVector& TokenFeatures::wasserstein() const {
  return tda ? tda->wasserstein : zero_features().wasserstein;
}

FeatureExtractor::FeatureExtractor(const EmbeddingMatrix& vocab, const EmbeddingMatrix* oov,
                                   FeatureConfig config)
    : vocab_(vocab), oov_(oov), config_(config) {
  if (config_.neighborhood_size < kCodensityOrders.back() + 1) {
    throw ValidationError("neighborhood size must be at least " +
                          std::to_string(kCodensityOrders.back() + 1));
  }
}

bool FeatureExtractor::has_embedding(std::string_view word) const {
  return vocab_.contains(word) || (oov_ != nullptr && oov_->contains(word));
}

WordComputation FeatureExtractor::compute(std::string_view word) const {
  const Neighborhood nb = neighborhood(vocab_, word, config_.neighborhood_size, oov_);
  WordComputation out;
  out.diagram = vr_persistence(nb.distances, config_.max_filtration);
  out.features.codensity = codensity_vector(nb);
  out.features.wasserstein = wasserstein_norm(out.diagram);
  out.features.pimage = persistence_image(out.diagram, config_.image);
  return out;
}

void FeatureCache::insert(const std::string& word, WordFeatures features) {
  entries_[word] = std::make_shared<const WordFeatures>(std::move(features));
}

std::shared_ptr<const WordFeatures> FeatureCache::get(const std::string& word) {
  if (auto it = entries_.find(word); it != entries_.end()) return it->second;
  if (auto it = missing_.find(word); it != missing_.end()) return nullptr;
  if (extractor_ != nullptr && extractor_->has_embedding(word)) {
    auto computed = extractor_->compute(word);
    ++computations_;
    auto ptr = std::make_shared<const WordFeatures>(std::move(computed.features));
    entries_.emplace(word, ptr);
    return ptr;
  }
  spdlog::warn("no embedding for '{}'; using zero TDA features", word);
  missing_.emplace(word, true);
  return nullptr;
}

std::string feature_record_json(const std::string& word, const WordFeatures& f) {
  nlohmann::json j = {{"word", word},
                      {"pimage_h0", f.pimage.h0_vector},
                      {"pimage_h1", f.pimage.h1_grid},
                      {"codensity", f.codensity},
                      {"wasserstein", f.wasserstein}};
  return j.dump();
}

WordFeatures parse_feature_record(std::string_view line, std::string* word) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("corrupt feature cache record: ") + e.what());
  }
  const std::string w = j.value("word", std::string("<unknown>"));
  if (word) *word = w;
  WordFeatures f;
  try {
    f.pimage.h0_vector = j.at("pimage_h0").get<std::vector<double>>();
    f.pimage.h1_grid = j.at("pimage_h1").get<std::vector<double>>();
    const auto c = j.at("codensity").get<std::vector<double>>();
    const auto ws = j.at("wasserstein").get<std::vector<double>>();
    if (f.pimage.h0_vector.size() != kImageH0Size || f.pimage.h1_grid.size() != kImageH1Size ||
        c.size() != f.codensity.size() || ws.size() != f.wasserstein.size()) {
      throw ParseError("feature cache record for '" + w + "' has wrong vector lengths");
    }
    std::copy(c.begin(), c.end(), f.codensity.begin());
    std::copy(ws.begin(), ws.end(), f.wasserstein.begin());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corrupt feature cache record for '" + w + "': " + e.what());
  }
  return f;
}

void FeatureCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write feature cache " + path.string());
  for (const auto& [word, f] : entries_) out << feature_record_json(word, *f) << '\n';
}

FeatureCache FeatureCache::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature cache " + path.string());
  FeatureCache cache;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string word;
    try {
      WordFeatures f = parse_feature_record(line, &word);
      cache.insert(word, std::move(f));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cache;
}

std::vector<TokenFeatures> assemble_features(const Utterance& u, FeatureCache& cache,
                                             const MlmScoreTable& mlm,
                                             const ContextualStore* contextual) {
  std::vector<TokenFeatures> out;
  out.reserve(u.tokens.size());
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    TokenFeatures t;
    t.word = u.tokens[i];
    t.tda = cache.get(t.word);
    t.missing = (t.tda == nullptr);
    t.mlm_score = mlm.score_of(t.word);
    if (contextual != nullptr) {
      if (auto v = contextual->token(u.utt_id, i)) t.contextual_embedding.emplace(v->begin(), v->end());
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace topoterm
