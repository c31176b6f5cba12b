#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace topoterm {

// Symmetric, zero-diagonal, nonnegative matrix of pairwise distances.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  // Row-major size x size entries; throws ValidationError when the matrix is
  // not a valid dissimilarity.
  DistanceMatrix(std::size_t size, std::vector<double> entries);

  std::size_t size() const { return size_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * size_ + j]; }
  const std::vector<double>& entries() const { return entries_; }

  DistanceMatrix scaled(double factor) const;
  DistanceMatrix permuted(const std::vector<std::size_t>& perm) const;

 private:
  std::size_t size_ = 0;
  std::vector<double> entries_;
};

struct PersistencePair {
  double birth = 0.0;
  double death = 0.0;

  double lifetime() const { return death - birth; }
  friend auto operator<=>(const PersistencePair&, const PersistencePair&) = default;
};

struct PersistenceDiagram {
  std::vector<PersistencePair> h0;
  std::vector<PersistencePair> h1;
  // Classes still alive at the maximal filtration value. They are counted,
  // never listed in h0/h1.
  std::size_t essential_h0 = 0;
  std::size_t essential_h1 = 0;

  // Sorts both degrees so that diagrams can be compared as multisets.
  void canonicalize();
  friend bool operator==(const PersistenceDiagram&, const PersistenceDiagram&) = default;
};

inline constexpr double kDefaultMaxFiltration = 1.0;

// Degree-0 and degree-1 persistence of the Vietoris-Rips filtration of `d`,
// restricted to simplices of diameter <= max_filtration, over F2. Pairs with
// birth == death are omitted. Throws ValidationError for an empty matrix or a
// non-positive max_filtration.
PersistenceDiagram vr_persistence(const DistanceMatrix& d,
                                  double max_filtration = kDefaultMaxFiltration);

struct H0Result {
  std::vector<PersistencePair> pairs;  // (0, death) in nondecreasing death order
  std::size_t essential = 0;
};

// Degree-0 persistence from Kruskal's minimum spanning forest.
H0Result h0_via_mst(const DistanceMatrix& d, double max_filtration = kDefaultMaxFiltration);

inline constexpr std::size_t kBruteForceMaxPoints = 12;

// Reference implementation: enumerates every simplex up to dimension 2 and
// reduces the full boundary matrix. Refuses more than 12 points.
PersistenceDiagram brute_force_persistence(
    const DistanceMatrix& d, double max_filtration = std::numeric_limits<double>::infinity());

// Diagram cache record {"word","h0","h1","essential_h0"}.
std::string diagram_record_json(const std::string& word, const PersistenceDiagram& diagram);
PersistenceDiagram parse_diagram_record(std::string_view line, std::string* word);

}  // namespace topoterm
