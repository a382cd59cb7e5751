#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "strudel/bitvector.hpp"
#include "strudel/cltree.hpp"
#include "strudel/vtree.hpp"

namespace strudel {

enum class NodeKind : std::uint8_t { kLiteral, kProduct, kSum };

struct SumEdge {
  std::int32_t child = -1;
  double log_weight = 0.0;
  std::int32_t param = -1;  // global parameter index, assigned by the circuit
};

struct CircuitNode {
  NodeKind kind = NodeKind::kLiteral;
  std::int32_t vtree_id = -1;
  // literal
  std::int32_t var = -1;
  bool positive = true;
  // product
  std::int32_t left = -1, right = -1;
  // sum
  std::vector<SumEdge> edges;
};

/// Smooth, deterministic, structured-decomposable probabilistic circuit.
/// Nodes are stored in topological order (children precede parents); sum-edge
/// weights are log-space and normalized per node; parameter indices enumerate
/// sum edges globally in node order.
struct Circuit {
  std::vector<CircuitNode> nodes;
  std::size_t root = 0;
  std::size_t num_vars = 0;
  std::size_t num_params = 0;

  /// Re-enumerates sum-edge parameter indices in topological order.
  void assign_param_indices();

  /// Size in edges (product children plus sum edges).
  std::size_t num_edges() const;
};

struct StructureViolation {
  std::size_t node;
  std::string reason;
};

struct StructureReport {
  bool smooth = false;
  bool decomposable = false;
  bool deterministic = false;
  bool structured = false;
  std::optional<StructureViolation> first_violation;

  bool all() const { return smooth && decomposable && deterministic && structured; }
};

/// Bottom-up compilation of a CLT into a circuit normalized for the vtree
/// distilled from it. Each CLT node contributes, per parent value, a sum that
/// branches on the node's literals; sub-circuits are cached so the result is
/// linear in the variable count. Throws if the vtree does not match the CLT.
Circuit compile_clt(const ChowLiuTree& t, const Vtree& v);

/// One bottom-up pass in log space; returns log p(x). Zero-probability
/// assignments return -infinity.
double evaluate_classical(const Circuit& c, const std::vector<bool>& assignment);

/// Per-node scopes as variable bitsets, in node order.
std::vector<BitVector> compute_scopes(const Circuit& c);

/// Per-node implied literals: pos[n] (resp. neg[n]) marks variables asserted
/// positively (negatively) on every accepting path through n. Used for the
/// structural determinism check.
struct ImpliedLiterals {
  std::vector<BitVector> pos, neg;
};
ImpliedLiterals implied_literals(const Circuit& c);

/// Checks smoothness and decomposability via scopes, determinism via pairwise
/// implied-literal conflicts under every sum, and structuredness by matching
/// every product's scope split against its vtree node.
StructureReport check_structure(const Circuit& c, const Vtree& v);

/// True iff every sum's children are pairwise support-disjoint by implied
/// literals (the structural determinism used by the flow evaluator).
bool is_structurally_deterministic(const Circuit& c);

/// Text format: `c` comments, `L <id> <vtreeId> <lit>` (lit = +/-(var+1)),
/// `P <id> <vtreeId> <left> <right>`,
/// `S <id> <vtreeId> <k> <child> <logWeight> ...`; children precede parents,
/// last node line is the root. Weights round-trip to 17 significant digits.
void write_circuit(const Circuit& c, const std::string& path);
Circuit read_circuit(const std::string& path);

}  // namespace strudel
