#include "topoterm/embedding_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "topoterm/error.hpp"

namespace topoterm {

void EmbeddingMatrix::add(std::string word, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw ValidationError("embedding for '" + word + "' has dimension " +
                          std::to_string(vector.size()) + ", expected " + std::to_string(dim_));
  }
  if (index_.contains(word)) throw ValidationError("duplicate embedding word '" + word + "'");
  double sq = 0.0;
  for (float x : vector) sq += static_cast<double>(x) * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    throw ValidationError("embedding for '" + word + "' has zero or non-finite norm");
  }
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  values_.insert(values_.end(), vector.begin(), vector.end());
  norms_.push_back(std::sqrt(sq));
}

std::optional<std::size_t> EmbeddingMatrix::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

float parse_float(std::string_view tok, const std::string& where) {
  float v = 0.0f;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(where + ": bad number '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

EmbeddingMatrix parse_embeddings(std::string_view text, const std::string& source) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    line = trim_cr(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    return true;
  };

  std::string_view header;
  if (!next_line(header) || header.substr(0, 4) != "DIM\t") {
    throw ParseError(source + ":1: expected header 'DIM<TAB><dim>'");
  }
  std::size_t dim = 0;
  {
    const auto num = header.substr(4);
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), dim);
    if (ec != std::errc() || ptr != num.data() + num.size() || dim == 0) {
      throw ParseError(source + ":1: bad dimension in header");
    }
  }

  EmbeddingMatrix m(dim);
  std::vector<float> row;
  row.reserve(dim);
  std::string_view line;
  while (next_line(line)) {
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) throw ParseError(where + ": expected word<TAB>values");
    std::string word(line.substr(0, tab));
    std::string_view rest = line.substr(tab + 1);
    row.clear();
    std::size_t p = 0;
    while (p < rest.size()) {
      while (p < rest.size() && rest[p] == ' ') ++p;
      if (p >= rest.size()) break;
      std::size_t q = rest.find(' ', p);
      if (q == std::string_view::npos) q = rest.size();
      row.push_back(parse_float(rest.substr(p, q - p), where));
      p = q;
    }
    if (row.size() != dim) {
      throw ValidationError(where + ": row for '" + word + "' has " + std::to_string(row.size()) +
                            " values, header says " + std::to_string(dim));
    }
    try {
      m.add(std::move(word), row);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embeddings(ss.str(), path.string());
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file " + path.string());
  out << "DIM\t" << m.dim() << '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.size(); ++r) {
    out << m.word(r) << '\t';
    const auto v = m.row(r);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v[k]);
      if (k) out << ' ';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

namespace {

template <typename T>
double cosine_distance_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) throw ValidationError("cosine_distance: dimension mismatch");
  double nu = 0.0, nv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    nu += static_cast<double>(u[k]) * u[k];
    nv += static_cast<double>(v[k]) * v[k];
  }
  if (!(nu > 0.0) || !(nv > 0.0)) throw ValidationError("cosine_distance: zero vector");
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double diff = static_cast<double>(u[k]) / nu - static_cast<double>(v[k]) / nv;
    s += diff * diff;
  }
  return std::clamp(0.5 * s, 0.0, 2.0);
}

// 1 - cos(a, b) written as half the squared distance between the unit
// vectors, which is exact zero for parallel rows and avoids cancellation for
// close neighbors.
double chord_distance(std::span<const float> a, double na, std::span<const float> b, double nb) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = static_cast<double>(a[k]) / na - static_cast<double>(b[k]) / nb;
    s += diff * diff;
  }
  return std::clamp(0.5 * s, 0.0, 2.0);
}

}  // namespace

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  return cosine_distance_impl(u, v);
}

double cosine_distance(std::span<const float> u, std::span<const float> v) {
  return cosine_distance_impl(u, v);
}

Neighborhood neighborhood(const EmbeddingMatrix& vocab, std::string_view word, std::size_t n,
                          const EmbeddingMatrix* aux) {
  if (n == 0) throw ValidationError("neighborhood size must be at least 1");
  std::span<const float> query;
  std::optional<std::size_t> self_row = vocab.find(word);
  if (self_row) {
    query = vocab.row(*self_row);
  } else if (aux != nullptr && aux->find(word)) {
    if (aux->dim() != vocab.dim()) throw ValidationError("OOV embedding dimension mismatch");
    query = aux->row(*aux->find(word));
  } else {
    throw MissingEmbedding(std::string(word));
  }
  const std::size_t others_needed = n - 1;
  const std::size_t candidates = vocab.size() - (self_row ? 1 : 0);
  if (others_needed > candidates) {
    throw ValidationError("neighborhood size " + std::to_string(n) + " exceeds vocabulary");
  }

  double qn = 0.0;
  for (float x : query) qn += static_cast<double>(x) * x;
  qn = std::sqrt(qn);

  // Exhaustive scan; rows are ranked by (distance, row) so ties resolve to the
  // lower vocabulary index.
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidates);
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    if (self_row && r == *self_row) continue;
    scored.emplace_back(chord_distance(query, qn, vocab.row(r), vocab.norm(r)), r);
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(others_needed),
                    scored.end());

  Neighborhood nb;
  nb.center_word = std::string(word);
  nb.center_index = 0;
  std::vector<std::span<const float>> rows;
  std::vector<double> norms;
  nb.member_words.push_back(nb.center_word);
  rows.push_back(query);
  norms.push_back(qn);
  for (std::size_t k = 0; k < others_needed; ++k) {
    const std::size_t r = scored[k].second;
    nb.member_words.push_back(vocab.word(r));
    rows.push_back(vocab.row(r));
    norms.push_back(vocab.norm(r));
  }

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = chord_distance(rows[i], norms[i], rows[j], norms[j]);
      dist[i * n + j] = v;
      dist[j * n + i] = v;
    }
  }
  nb.distances = DistanceMatrix(n, std::move(dist));
  return nb;
}

}  // namespace topoterm
