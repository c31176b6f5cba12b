#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "topoterm/persistence.hpp"

namespace topoterm {

// Row-major word vectors with an index from word to row. Rows are stored in
// single precision; all distance arithmetic is done in double.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::size_t dim) : dim_(dim) {}

  // Throws ValidationError on duplicate words, wrong dimension or zero norm.
  void add(std::string word, std::span<const float> vector);

  std::size_t size() const { return words_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t row) const { return words_[row]; }

  std::optional<std::size_t> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }

  std::span<const float> row(std::size_t r) const {
    return {values_.data() + r * dim_, dim_};
  }
  double norm(std::size_t r) const { return norms_[r]; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<float> values_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
EmbeddingMatrix parse_embeddings(std::string_view text, const std::string& source = "<memory>");
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);

// 1 - cos(u, v), computed as half the squared distance between the unit
// vectors and clamped to [0, 2]. Throws ValidationError on a zero vector.
double cosine_distance(std::span<const double> u, std::span<const double> v);
double cosine_distance(std::span<const float> u, std::span<const float> v);

struct Neighborhood {
  std::string center_word;
  std::vector<std::string> member_words;
  DistanceMatrix distances;
  std::size_t center_index = 0;

  std::size_t size() const { return member_words.size(); }
};

// The query word plus its n-1 nearest vocabulary words by cosine distance,
// ties going to the lower vocabulary row. The query vector is taken from the
// vocabulary first and from `aux` (the supplementary OOV file) otherwise.
// Throws MissingEmbedding if neither holds the word.
Neighborhood neighborhood(const EmbeddingMatrix& vocab, std::string_view word, std::size_t n,
                          const EmbeddingMatrix* aux = nullptr);

}  // namespace topoterm
