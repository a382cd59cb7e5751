#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "strudel/bitvector.hpp"
#include "strudel/cltree.hpp"

namespace strudel {

/// Node of a full binary tree over variables. Leaves carry var >= 0; internal
/// nodes carry child ids. Nodes are stored children-before-parents; the last
/// node is the root.
struct VtreeNode {
  int left = -1;
  int right = -1;
  int var = -1;

  bool is_leaf() const { return var >= 0; }
};

struct Vtree {
  std::vector<VtreeNode> nodes;
  std::size_t root = 0;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_leaves() const { return (nodes.size() + 1) / 2; }
};

struct VtreeViolation {
  std::size_t node;
  std::string reason;
};

/// Distills a vtree from a rooted CLT: a leaf CLT node becomes a vtree leaf;
/// an internal CLT node becomes an internal vtree node with its own variable
/// leaf on the left and the subtree over its children on the right. Multiple
/// children combine into a right-deep chain in ascending index order.
Vtree vtree_from_clt(const ChowLiuTree& t);

/// Checks the full-binary / variable-partition invariants; returns the first
/// violation found, or nothing when the vtree is well formed.
std::optional<VtreeViolation> validate_vtree(const Vtree& v);

/// Per-node variable sets, indexed like v.nodes.
std::vector<BitVector> vtree_var_sets(const Vtree& v, std::size_t num_vars);

/// Text format: `c` comments, `L <id> <var>` leaves, `I <id> <left> <right>`
/// internals; children precede parents and the last line is the root.
/// Variables are 1-based on disk.
void write_vtree(const Vtree& v, const std::string& path);
Vtree read_vtree(const std::string& path);

}  // namespace strudel
