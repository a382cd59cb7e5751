#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "strudel/circuit.hpp"
#include "strudel/dataset.hpp"
#include "strudel/flows.hpp"
#include "strudel/rng.hpp"

namespace strudel {

enum class Heuristic { kEflowVmi, kEflowVrand, kErandVmi, kErandVrand };

std::optional<Heuristic> heuristic_from_name(const std::string& name);
std::string heuristic_name(Heuristic h);

struct SearchConfig {
  Heuristic heuristic = Heuristic::kEflowVmi;
  int depth_bound = 1;     // split copies the product plus this many levels below
  int patience = 100;      // iterations without validation improvement
  int max_iters = 10000;
  std::uint64_t seed = 1337;
  double alpha = 1.0;        // Laplace smoothing for CLT and vMI estimates
  double pseudocount = 1.0;  // parameter refit smoothing
};

/// A sum-to-product edge eligible for splitting.
struct SplitCandidate {
  std::size_t sum_id = 0;
  std::size_t child_index = 0;
};

/// Per-node positive/negative literal occurrence (union over all paths).
/// A variable is splittable below a node iff both polarities occur.
struct LiteralOccurrence {
  std::vector<BitVector> pos, neg;

  BitVector splittable(std::size_t node) const {
    BitVector s = pos[node];
    s.and_with(neg[node]);
    return s;
  }
};
LiteralOccurrence literal_occurrence(const Circuit& c);

/// Eligible edges in deterministic (sum id, child index) order: the child
/// must be a product with at least one splittable variable.
std::vector<SplitCandidate> split_candidates(const Circuit& c);

/// Index of the candidate with maximum aggregate flow; ties keep the first
/// (smallest node id, child id). Empty candidate set signals exhaustion.
std::optional<std::size_t> score_edge_eflow(const Circuit& c, const AggregateFlows& a,
                                            const std::vector<SplitCandidate>& candidates);

/// Uniform choice among `count` options; deterministic per Rng state. Covers
/// both the random-edge and random-variable strategies.
std::size_t score_random(std::size_t count, Rng& rng);

/// Variable with maximum summed pairwise MI among the split child's
/// splittable variables, estimated on the samples flowing through the edge
/// (whole dataset when none flow). Ties pick the smallest index.
std::size_t score_var_vmi(const Circuit& c, const Dataset& d, double alpha, SplitCandidate edge,
                          const FlowMatrix& f);

/// The split transformation: replaces the chosen product under its sum parent
/// by two partial copies conditioned on variable = 1 and = 0. Restricted sums
/// keep one edge (weight one); nodes deeper than depth_bound below the copies
/// stay shared. Preserves smoothness, determinism, and structured
/// decomposability; parameters are left for the caller to refit.
Circuit split(const Circuit& c, SplitCandidate edge, std::size_t variable, int depth_bound);

struct IterationStats {
  std::size_t iteration = 0;  // 0 is the compiled CLT before any split
  double train_ll = 0.0;      // mean per sample
  double valid_ll = 0.0;
  std::size_t num_edges = 0;
  double seconds = 0.0;
};
using IterationCallback = std::function<void(const IterationStats&)>;

struct LearnResult {
  Circuit circuit;  // best validation LL seen
  Vtree vtree;
};

/// Full greedy learner: CLT initialization, then split / refit iterations
/// with validation-based early stopping. Returns the circuit with the best
/// validation likelihood seen, plus the vtree it is normalized for.
LearnResult strudel_learn(const Dataset& train, const Dataset& valid, const SearchConfig& cfg,
                          const IterationCallback& on_iteration = nullptr);

}  // namespace strudel
