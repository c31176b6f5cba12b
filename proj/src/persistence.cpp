#include "topoterm/persistence.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <tuple>

#include <json.hpp>

#include "topoterm/error.hpp"
#include "topoterm/union_find.hpp"

namespace topoterm {

DistanceMatrix::DistanceMatrix(std::size_t size, std::vector<double> entries)
    : size_(size), entries_(std::move(entries)) {
  if (entries_.size() != size_ * size_) {
    throw ValidationError("distance matrix: expected " + std::to_string(size_ * size_) +
                          " entries, got " + std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < size_; ++i) {
    if (entries_[i * size_ + i] != 0.0) {
      throw ValidationError("distance matrix: nonzero diagonal at " + std::to_string(i));
    }
    for (std::size_t j = i + 1; j < size_; ++j) {
      const double a = entries_[i * size_ + j];
      if (!(a >= 0.0) || std::isinf(a)) {
        throw ValidationError("distance matrix: invalid entry at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
      if (a != entries_[j * size_ + i]) {
        throw ValidationError("distance matrix: asymmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
    }
  }
}

DistanceMatrix DistanceMatrix::scaled(double factor) const {
  std::vector<double> e = entries_;
  for (auto& x : e) x *= factor;
  return DistanceMatrix(size_, std::move(e));
}

DistanceMatrix DistanceMatrix::permuted(const std::vector<std::size_t>& perm) const {
  std::vector<double> e(entries_.size());
  for (std::size_t i = 0; i < size_; ++i) {
    for (std::size_t j = 0; j < size_; ++j) e[i * size_ + j] = (*this)(perm[i], perm[j]);
  }
  return DistanceMatrix(size_, std::move(e));
}

void PersistenceDiagram::canonicalize() {
  std::sort(h0.begin(), h0.end());
  std::sort(h1.begin(), h1.end());
}

namespace {

struct Edge {
  double length;
  std::uint32_t u;
  std::uint32_t v;
};

// Edges of diameter <= max_filtration in filtration order; ties go to the
// lexicographically smaller vertex pair.
std::vector<Edge> sorted_edges(const DistanceMatrix& d, double max_filtration) {
  std::vector<Edge> edges;
  const std::size_t n = d.size();
  edges.reserve(n * (n - 1) / 2);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      if (d(i, j) <= max_filtration) edges.push_back({d(i, j), i, j});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.length, a.u, a.v) < std::tie(b.length, b.u, b.v);
  });
  return edges;
}

void check_input(const DistanceMatrix& d, double max_filtration) {
  if (d.size() == 0) throw ValidationError("persistence of an empty point set");
  if (!(max_filtration > 0.0)) throw ValidationError("max_filtration must be positive");
}

// Fixed-width F2 column over the positive (cycle-creating) edges.
class BitColumn {
 public:
  explicit BitColumn(std::size_t bits) : words_((bits + 63) / 64, 0) {}

  void flip(std::size_t bit) { words_[bit >> 6] ^= std::uint64_t{1} << (bit & 63); }
  void add(const BitColumn& other) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] ^= other.words_[w];
  }
  // Highest set bit, or -1 when the column is zero.
  std::ptrdiff_t pivot() const {
    for (std::size_t w = words_.size(); w-- > 0;) {
      if (words_[w] != 0) {
        return static_cast<std::ptrdiff_t>(w * 64 + 63 - std::countl_zero(words_[w]));
      }
    }
    return -1;
  }

 private:
  std::vector<std::uint64_t> words_;
};

struct Triangle {
  double diameter;
  std::uint32_t a, b, c;
};

}  // namespace

H0Result h0_via_mst(const DistanceMatrix& d, double max_filtration) {
  check_input(d, max_filtration);
  H0Result out;
  UnionFind uf(d.size());
  std::size_t components = d.size();
  for (const Edge& e : sorted_edges(d, max_filtration)) {
    if (uf.unite(e.u, e.v)) {
      --components;
      if (e.length > 0.0) out.pairs.push_back({0.0, e.length});
    }
  }
  out.essential = components;
  return out;
}

PersistenceDiagram vr_persistence(const DistanceMatrix& d, double max_filtration) {
  check_input(d, max_filtration);
  const std::size_t n = d.size();
  PersistenceDiagram dgm;

  const std::vector<Edge> edges = sorted_edges(d, max_filtration);

  // Degree 0: union-find over the edge order. Edges that merge components are
  // the H0 deaths and can never be H1 births, so they are cleared from the
  // degree-1 reduction below.
  UnionFind uf(n);
  std::size_t components = n;
  constexpr std::int32_t kAbsent = -1;
  std::vector<std::int32_t> positive_index(n * n, kAbsent);
  std::vector<double> positive_length;
  for (const Edge& e : edges) {
    if (uf.unite(e.u, e.v)) {
      --components;
      if (e.length > 0.0) dgm.h0.push_back({0.0, e.length});
    } else {
      const auto idx = static_cast<std::int32_t>(positive_length.size());
      positive_index[e.u * n + e.v] = idx;
      positive_index[e.v * n + e.u] = idx;
      positive_length.push_back(e.length);
    }
  }
  dgm.essential_h0 = components;

  const std::size_t num_positive = positive_length.size();
  if (num_positive == 0) return dgm;

  // Degree 1: reduce triangle boundaries projected onto the positive edges.
  // Every 1-cycle is the sum of the fundamental cycles of its positive edges
  // and its latest edge is positive, so the projection preserves both the
  // linear relations and the pivots of the full boundary matrix.
  std::vector<Triangle> triangles;
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = a + 1; b < n; ++b) {
      const double ab = d(a, b);
      if (ab > max_filtration) continue;
      for (std::uint32_t c = b + 1; c < n; ++c) {
        const double diam = std::max({ab, d(a, c), d(b, c)});
        if (diam <= max_filtration) triangles.push_back({diam, a, b, c});
      }
    }
  }
  std::sort(triangles.begin(), triangles.end(), [](const Triangle& x, const Triangle& y) {
    return std::tie(x.diameter, x.a, x.b, x.c) < std::tie(y.diameter, y.a, y.b, y.c);
  });

  std::vector<std::int32_t> pivot_owner(num_positive, kAbsent);
  std::vector<BitColumn> reduced;
  std::size_t paired = 0;
  for (const Triangle& t : triangles) {
    if (paired == num_positive) break;
    BitColumn col(num_positive);
    const std::array<std::pair<std::uint32_t, std::uint32_t>, 3> faces = {
        {{t.a, t.b}, {t.a, t.c}, {t.b, t.c}}};
    for (const auto& [u, v] : faces) {
      const std::int32_t idx = positive_index[u * n + v];
      if (idx != kAbsent) col.flip(static_cast<std::size_t>(idx));
    }
    std::ptrdiff_t low = col.pivot();
    while (low >= 0 && pivot_owner[low] != kAbsent) {
      col.add(reduced[pivot_owner[low]]);
      low = col.pivot();
    }
    if (low < 0) continue;
    pivot_owner[low] = static_cast<std::int32_t>(reduced.size());
    reduced.push_back(std::move(col));
    ++paired;
    const double birth = positive_length[low];
    if (t.diameter > birth) dgm.h1.push_back({birth, t.diameter});
  }
  dgm.essential_h1 = num_positive - paired;
  std::sort(dgm.h1.begin(), dgm.h1.end());
  return dgm;
}

PersistenceDiagram brute_force_persistence(const DistanceMatrix& d, double max_filtration) {
  check_input(d, max_filtration);
  const std::size_t n = d.size();
  if (n > kBruteForceMaxPoints) {
    throw ValidationError("brute_force_persistence: " + std::to_string(n) +
                          " points exceeds the limit of " + std::to_string(kBruteForceMaxPoints));
  }

  struct Simplex {
    std::vector<std::size_t> vertices;
    double value;
  };
  std::vector<Simplex> simplices;
  for (std::size_t a = 0; a < n; ++a) simplices.push_back({{a}, 0.0});
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (d(a, b) <= max_filtration) simplices.push_back({{a, b}, d(a, b)});
      for (std::size_t c = b + 1; c < n; ++c) {
        const double diam = std::max({d(a, b), d(a, c), d(b, c)});
        if (diam <= max_filtration) simplices.push_back({{a, b, c}, diam});
      }
    }
  }
  std::stable_sort(simplices.begin(), simplices.end(), [](const Simplex& x, const Simplex& y) {
    if (x.value != y.value) return x.value < y.value;
    if (x.vertices.size() != y.vertices.size()) return x.vertices.size() < y.vertices.size();
    return x.vertices < y.vertices;
  });

  const std::size_t m = simplices.size();
  std::vector<std::vector<std::size_t>> columns(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& s = simplices[j].vertices;
    if (s.size() == 1) continue;
    for (std::size_t drop = 0; drop < s.size(); ++drop) {
      std::vector<std::size_t> face;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k != drop) face.push_back(s[k]);
      }
      for (std::size_t i = 0; i < j; ++i) {
        if (simplices[i].vertices == face) {
          columns[j].push_back(i);
          break;
        }
      }
    }
    std::sort(columns[j].begin(), columns[j].end());
  }

  // Standard left-to-right reduction over F2.
  std::vector<std::ptrdiff_t> low_owner(m, -1);
  std::vector<bool> is_death(m, false), is_birth_paired(m, false);
  PersistenceDiagram dgm;
  for (std::size_t j = 0; j < m; ++j) {
    auto& col = columns[j];
    while (!col.empty() && low_owner[col.back()] >= 0) {
      const auto& other = columns[static_cast<std::size_t>(low_owner[col.back()])];
      std::vector<std::size_t> sum;
      std::set_symmetric_difference(col.begin(), col.end(), other.begin(), other.end(),
                                    std::back_inserter(sum));
      col = std::move(sum);
    }
    if (col.empty()) continue;
    const std::size_t low = col.back();
    low_owner[low] = static_cast<std::ptrdiff_t>(j);
    is_death[j] = true;
    is_birth_paired[low] = true;
    const double birth = simplices[low].value;
    const double death = simplices[j].value;
    if (death > birth) {
      const std::size_t degree = simplices[low].vertices.size() - 1;
      if (degree == 0) dgm.h0.push_back({birth, death});
      if (degree == 1) dgm.h1.push_back({birth, death});
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (is_death[j] || is_birth_paired[j] || !columns[j].empty()) continue;
    const std::size_t degree = simplices[j].vertices.size() - 1;
    if (degree == 0) ++dgm.essential_h0;
    if (degree == 1) ++dgm.essential_h1;
  }
  dgm.canonicalize();
  return dgm;
}

std::string diagram_record_json(const std::string& word, const PersistenceDiagram& diagram) {
  auto pairs = [](const std::vector<PersistencePair>& ps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : ps) arr.push_back({p.birth, p.death});
    return arr;
  };
  nlohmann::json j = {{"word", word},
                      {"h0", pairs(diagram.h0)},
                      {"h1", pairs(diagram.h1)},
                      {"essential_h0", diagram.essential_h0}};
  return j.dump();
}

PersistenceDiagram parse_diagram_record(std::string_view line, std::string* word) {
  PersistenceDiagram dgm;
  try {
    const auto j = nlohmann::json::parse(line);
    if (word) *word = j.at("word").get<std::string>();
    for (const auto& p : j.at("h0")) dgm.h0.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    for (const auto& p : j.at("h1")) dgm.h1.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    dgm.essential_h0 = j.at("essential_h0").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad diagram record: ") + e.what());
  }
  return dgm;
}

}  // namespace topoterm
