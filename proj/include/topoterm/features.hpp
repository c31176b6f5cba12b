#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topoterm/corpus.hpp"
#include "topoterm/embedding_store.hpp"
#include "topoterm/persistence.hpp"

namespace topoterm {

class MlmScoreTable;
class ContextualStore;

// ---------------------------------------------------------------------------
// Codensity

inline constexpr std::array<std::size_t, 6> kCodensityOrders = {1, 2, 5, 10, 20, 40};

using CodensityVector = std::array<double, kCodensityOrders.size()>;

// k-th smallest distance from the center to the other members, for each k in
// kCodensityOrders. Needs at least 41 members.
CodensityVector codensity_vector(const Neighborhood& nb);
CodensityVector codensity_vector(const DistanceMatrix& d, std::size_t center);

// ---------------------------------------------------------------------------
// Wasserstein

using WassersteinVector = std::array<double, 2>;  // {H0 norm, H1 norm}

inline constexpr std::size_t kWassersteinMaxPoints = 200;

// Order-1 transport cost of every finite point to the diagonal, per degree.
WassersteinVector wasserstein_norm(const PersistenceDiagram& diagram);
double wasserstein_norm(std::span<const PersistencePair> pairs);

// Order-q Wasserstein distance with Euclidean ground metric between two
// single-degree diagrams, solved exactly as an assignment problem in which a
// point may be matched to its diagonal projection. Throws ValidationError if
// either diagram holds more than max_points points.
double wasserstein_distance(std::span<const PersistencePair> a, std::span<const PersistencePair> b,
                            double order = 1.0, std::size_t max_points = kWassersteinMaxPoints);

// Minimum-cost perfect matching on a square row-major cost matrix. Returns the
// column assigned to every row.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

// ---------------------------------------------------------------------------
// Persistence images

struct ImageGrid {
  double birth_min, birth_max;
  std::size_t birth_bins;
  double lifetime_min, lifetime_max;
  std::size_t lifetime_bins;

  double birth_edge(std::size_t k) const {
    return birth_min + (birth_max - birth_min) * static_cast<double>(k) / static_cast<double>(birth_bins);
  }
  double lifetime_edge(std::size_t k) const {
    return lifetime_min +
           (lifetime_max - lifetime_min) * static_cast<double>(k) / static_cast<double>(lifetime_bins);
  }
};

struct ImageParams {
  double variance = 0.0007;  // per-axis variance of the Gaussian kernel
  ImageGrid h0{0.0, 1.0, 100, 0.0, 1.0, 100};
  ImageGrid h1{0.0, 1.0, 100, 0.0, 0.3, 30};
};

inline constexpr std::size_t kImageH0Size = 100;
inline constexpr std::size_t kImageH1Births = 100;
inline constexpr std::size_t kImageH1Lifetimes = 30;
inline constexpr std::size_t kImageH1Size = kImageH1Births * kImageH1Lifetimes;

struct PersistenceImage {
  // First birth column of the H0 image, indexed by lifetime bin.
  std::vector<double> h0_vector = std::vector<double>(kImageH0Size, 0.0);
  // Birth-major H1 image: h1_grid[birth_bin * 30 + lifetime_bin].
  std::vector<double> h1_grid = std::vector<double>(kImageH1Size, 0.0);

  double h1(std::size_t birth_bin, std::size_t lifetime_bin) const {
    return h1_grid[birth_bin * kImageH1Lifetimes + lifetime_bin];
  }
  friend bool operator==(const PersistenceImage&, const PersistenceImage&) = default;
};

// Probability mass of N(mean, variance) inside [lo, hi], accurate in the tails.
double gaussian_interval_mass(double lo, double hi, double mean, double variance);

// Lifetime-weighted Gaussian surface over (birth, lifetime), integrated over
// each pixel. Only finite pairs are used.
PersistenceImage persistence_image(const PersistenceDiagram& diagram, const ImageParams& params = {});

// Full pixel grid for one degree (birth-major), used for the H0 column and
// exposed for inspection.
std::vector<double> persistence_image_grid(std::span<const PersistencePair> pairs,
                                           const ImageGrid& grid, double variance);

// ---------------------------------------------------------------------------
// Per-word and per-token bundles

struct WordFeatures {
  PersistenceImage pimage;
  CodensityVector codensity{};
  WassersteinVector wasserstein{};
  friend bool operator==(const WordFeatures&, const WordFeatures&) = default;
};

struct TokenFeatures {
  std::string word;
  std::shared_ptr<const WordFeatures> tda;  // null when missing
  double mlm_score = 0.5;
  std::optional<std::vector<float>> contextual_embedding;
  bool missing = false;

  const PersistenceImage& pimage() const;
  const CodensityVector& codensity() const;
  const WassersteinVector& wasserstein() const;
};

struct FeatureConfig {
  std::size_t neighborhood_size = 50;
  double max_filtration = kDefaultMaxFiltration;
  ImageParams image;
};

struct WordComputation {
  PersistenceDiagram diagram;
  WordFeatures features;
};

// Computes the TDA features of one word from the static point cloud.
class FeatureExtractor {
 public:
  FeatureExtractor(const EmbeddingMatrix& vocab, const EmbeddingMatrix* oov, FeatureConfig config);

  // Throws MissingEmbedding if the word has no vector.
  WordComputation compute(std::string_view word) const;
  bool has_embedding(std::string_view word) const;
  const FeatureConfig& config() const { return config_; }

 private:
  const EmbeddingMatrix& vocab_;
  const EmbeddingMatrix* oov_;
  FeatureConfig config_;
};

// Word -> feature memo. With an extractor attached, misses are computed and
// stored; without one, unknown words are reported missing.
class FeatureCache {
 public:
  explicit FeatureCache(const FeatureExtractor* extractor = nullptr) : extractor_(extractor) {}

  void insert(const std::string& word, WordFeatures features);
  void mark_missing(const std::string& word) { missing_.insert({word, true}); }

  // Null when the word has no embedding; logs a warning the first time.
  std::shared_ptr<const WordFeatures> get(const std::string& word);

  bool contains(const std::string& word) const { return entries_.contains(word); }
  std::size_t size() const { return entries_.size(); }
  std::size_t computations() const { return computations_; }
  const std::map<std::string, std::shared_ptr<const WordFeatures>>& entries() const { return entries_; }

  // Feature cache JSONL, one record per word in lexicographic order.
  void save(const std::filesystem::path& path) const;
  static FeatureCache load(const std::filesystem::path& path);

 private:
  const FeatureExtractor* extractor_;
  std::map<std::string, std::shared_ptr<const WordFeatures>> entries_;
  std::map<std::string, bool> missing_;
  std::size_t computations_ = 0;
};

std::string feature_record_json(const std::string& word, const WordFeatures& f);
WordFeatures parse_feature_record(std::string_view line, std::string* word);

// One TokenFeatures per token. Repeated words share one memoized bundle.
std::vector<TokenFeatures> assemble_features(const Utterance& u, FeatureCache& cache,
                                             const MlmScoreTable& mlm,
                                             const ContextualStore* contextual = nullptr);

}  // namespace topoterm
