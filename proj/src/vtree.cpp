#include "strudel/vtree.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "strudel/dataset.hpp"

namespace strudel {

namespace {

struct VtreeBuilder {
  const ChowLiuTree& t;
  Vtree out;

  int leaf(std::size_t var) {
    out.nodes.push_back({-1, -1, static_cast<int>(var)});
    return static_cast<int>(out.nodes.size() - 1);
  }
  int internal(int l, int r) {
    out.nodes.push_back({l, r, -1});
    return static_cast<int>(out.nodes.size() - 1);
  }

  int build(std::size_t clt_node) {
    if (t.is_leaf(clt_node)) return leaf(clt_node);
    int l = leaf(clt_node);
    int r = chain(t.children[clt_node], 0);
    return internal(l, r);
  }

  // Right-deep chain over children[first..], ascending index order.
  int chain(const std::vector<std::size_t>& children, std::size_t first) {
    if (first + 1 == children.size()) return build(children[first]);
    int l = build(children[first]);
    int r = chain(children, first + 1);
    return internal(l, r);
  }
};

}  // namespace

Vtree vtree_from_clt(const ChowLiuTree& t) {
  VtreeBuilder b{t, {}};
  b.out.root = static_cast<std::size_t>(b.build(t.root));
  return b.out;
}

std::vector<BitVector> vtree_var_sets(const Vtree& v, std::size_t num_vars) {
  std::vector<BitVector> sets(v.nodes.size(), BitVector(num_vars));
  for (std::size_t i = 0; i < v.nodes.size(); ++i) {
    const VtreeNode& n = v.nodes[i];
    if (n.is_leaf()) {
      sets[i].set(static_cast<std::size_t>(n.var));
    } else {
      sets[i].or_with(sets[static_cast<std::size_t>(n.left)]);
      sets[i].or_with(sets[static_cast<std::size_t>(n.right)]);
    }
  }
  return sets;
}

std::optional<VtreeViolation> validate_vtree(const Vtree& v) {
  const std::size_t n = v.nodes.size();
  if (n == 0) return VtreeViolation{0, "empty vtree"};
  if (v.root >= n) return VtreeViolation{v.root, "root id out of range"};

  std::vector<int> ref_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const VtreeNode& node = v.nodes[i];
    if (node.is_leaf()) {
      if (node.left >= 0 || node.right >= 0)
        return VtreeViolation{i, "leaf with children"};
      continue;
    }
    if (node.left < 0 || node.right < 0)
      return VtreeViolation{i, "not full binary: internal node missing a child"};
    if (static_cast<std::size_t>(node.left) >= i || static_cast<std::size_t>(node.right) >= i)
      return VtreeViolation{i, "children must precede parents"};
    if (node.left == node.right) return VtreeViolation{i, "children must be distinct"};
    ++ref_count[static_cast<std::size_t>(node.left)];
    ++ref_count[static_cast<std::size_t>(node.right)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i == v.root) {
      if (ref_count[i] != 0) return VtreeViolation{i, "root has a parent"};
    } else if (ref_count[i] != 1) {
      return VtreeViolation{i, ref_count[i] == 0 ? "unreachable node" : "node has two parents"};
    }
  }

  // Variable partition: every variable in exactly one leaf.
  std::size_t num_leaves = 0;
  int max_var = -1;
  for (const auto& node : v.nodes) {
    if (node.is_leaf()) {
      ++num_leaves;
      max_var = std::max(max_var, node.var);
    }
  }
  if (num_leaves != v.nodes.size() - num_leaves + 1)
    return VtreeViolation{v.root, "leaf/internal count mismatch"};
  std::vector<int> seen(static_cast<std::size_t>(max_var) + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const VtreeNode& node = v.nodes[i];
    if (node.is_leaf()) {
      if (++seen[static_cast<std::size_t>(node.var)] > 1)
        return VtreeViolation{i, "variable multiplicity"};
    }
  }
  if (static_cast<std::size_t>(max_var) + 1 != num_leaves)
    return VtreeViolation{v.root, "variable indices not contiguous"};
  return std::nullopt;
}

void write_vtree(const Vtree& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vtree file: " + path);
  out << "c vtree: L <id> <var>, I <id> <left> <right>; vars are 1-based\n";
  for (std::size_t i = 0; i < v.nodes.size(); ++i) {
    const VtreeNode& n = v.nodes[i];
    if (n.is_leaf()) {
      out << "L " << i << ' ' << n.var + 1 << '\n';
    } else {
      out << "I " << i << ' ' << n.left << ' ' << n.right << '\n';
    }
  }
}

Vtree read_vtree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vtree file: " + path);
  Vtree v;
  std::unordered_map<long, int> id_map;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ParseError("vtree line " + std::to_string(line_no) + ": " + msg);
  };
  auto resolve = [&](long file_id) {
    auto it = id_map.find(file_id);
    if (it == id_map.end()) fail("unknown child id " + std::to_string(file_id));
    return it->second;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == 'c') continue;
    std::istringstream ss(line);
    char tag;
    ss >> tag;
    if (tag == 'L') {
      long id, var;
      if (!(ss >> id >> var) || var < 1) fail("malformed leaf line");
      if (!id_map.emplace(id, static_cast<int>(v.nodes.size())).second) fail("duplicate id");
      v.nodes.push_back({-1, -1, static_cast<int>(var - 1)});
    } else if (tag == 'I') {
      long id, l, r;
      if (!(ss >> id >> l >> r)) fail("malformed internal line");
      int li = resolve(l), ri = resolve(r);
      if (!id_map.emplace(id, static_cast<int>(v.nodes.size())).second) fail("duplicate id");
      v.nodes.push_back({li, ri, -1});
    } else {
      fail(std::string("unknown node tag '") + tag + "'");
    }
  }
  if (v.nodes.empty()) throw ParseError("vtree file has no nodes: " + path);
  v.root = v.nodes.size() - 1;
  return v;
}

}  // namespace strudel
