#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "strudel/dataset.hpp"

namespace strudel {

/// Symmetric matrix of pairwise mutual information in nats. The diagonal is
/// unused.
struct MutualInfoMatrix {
  std::size_t num_vars = 0;
  std::vector<double> values;  // row-major num_vars x num_vars

  explicit MutualInfoMatrix(std::size_t n) : num_vars(n), values(n * n, 0.0) {}
  double at(std::size_t i, std::size_t j) const { return values[i * num_vars + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    values[i * num_vars + j] = v;
    values[j * num_vars + i] = v;
  }
};

/// Rooted tree-shaped Bayesian network over binary variables.
///
/// cpt[i][v] = p(X_i = 1 | X_parent(i) = v). The root stores its marginal in
/// both slots, so cpt[root][0] == cpt[root][1].
struct ChowLiuTree {
  std::size_t num_vars = 0;
  std::size_t root = 0;
  std::vector<int> parent;                    // -1 for the root
  std::vector<std::array<double, 2>> cpt;     // p(X_i=1 | parent value)
  std::vector<std::vector<std::size_t>> children;  // ascending index order

  bool is_leaf(std::size_t i) const { return children[i].empty(); }
};

struct UndirectedEdge {
  std::size_t a, b;  // a < b
  bool operator==(const UndirectedEdge&) const = default;
};

/// Four smoothed pairwise cell counts for one variable pair.
struct PairCounts {
  double c00 = 0, c01 = 0, c10 = 0, c11 = 0;
};

/// Weighted joint counts of (X_i = a, X_j = b) over the samples selected by
/// `mask` (all samples when null).
PairCounts pair_counts(const Dataset& d, std::size_t i, std::size_t j,
                       const BitVector* mask = nullptr);

/// Smoothed pairwise mutual information over all variables, in nats:
/// p(a,b) = (count + alpha) / (W + 4 alpha) with marginals summed from the
/// smoothed joint. Zero-probability cells contribute zero.
MutualInfoMatrix estimate_mi(const Dataset& d, double alpha);

/// Same estimate restricted to a variable subset and (optionally) a sample
/// mask; result is indexed in subset order. Falls back to all samples when
/// the mask selects none.
MutualInfoMatrix estimate_mi_subset(const Dataset& d, double alpha,
                                    const std::vector<std::size_t>& vars,
                                    const BitVector* mask = nullptr);

/// Deterministic maximum spanning tree over the complete MI graph: edges are
/// considered by descending weight, ties by lexicographically smallest (i,j).
std::vector<UndirectedEdge> maximum_spanning_tree(const MutualInfoMatrix& mi);

/// Vertex of minimum eccentricity; the smaller index wins ties.
std::size_t root_at_jordan_center(std::size_t num_vars, const std::vector<UndirectedEdge>& edges);

/// Full Chow-Liu pipeline: smoothed MI, maximum spanning tree, Jordan-center
/// rooting, CPT estimation with the same Laplace factor.
ChowLiuTree learn_clt(const Dataset& d, double alpha);

}  // namespace strudel
