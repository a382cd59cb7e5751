#include "strudel/circuit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace strudel {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void Circuit::assign_param_indices() {
  std::int32_t next = 0;
  for (auto& n : nodes) {
    if (n.kind != NodeKind::kSum) continue;
    for (auto& e : n.edges) e.param = next++;
  }
  num_params = static_cast<std::size_t>(next);
}

std::size_t Circuit::num_edges() const {
  std::size_t count = 0;
  for (const auto& n : nodes) {
    if (n.kind == NodeKind::kProduct) count += 2;
    if (n.kind == NodeKind::kSum) count += n.edges.size();
  }
  return count;
}

namespace {

/// Pairs every CLT node with its vtree node and records the ids the compiler
/// needs: the annotation node per CLT variable and the internal ids of the
/// right-deep chain over its children.
struct CltVtreeMap {
  std::vector<int> annotation;          // per CLT node: leaf id or pairing internal id
  std::vector<int> leaf_id;             // per CLT node: its variable's leaf id
  std::vector<std::vector<int>> chain;  // per CLT node: chain internals, one per junction
};

class CltVtreePairing {
public:
  CltVtreePairing(const ChowLiuTree& t, const Vtree& v) : t_(t), v_(v) {
    map_.annotation.assign(t.num_vars, -1);
    map_.leaf_id.assign(t.num_vars, -1);
    map_.chain.assign(t.num_vars, {});
  }

  CltVtreeMap run() {
    pair_node(t_.root, static_cast<int>(v_.root));
    return std::move(map_);
  }

private:
  [[noreturn]] void mismatch(std::size_t clt_node, int vtree_id, const std::string& what) {
    throw std::runtime_error("vtree mismatch at variable " + std::to_string(clt_node + 1) +
                             " / vtree node " + std::to_string(vtree_id) + ": " + what);
  }

  void pair_node(std::size_t i, int w) {
    const VtreeNode& node = v_.nodes[static_cast<std::size_t>(w)];
    if (t_.is_leaf(i)) {
      if (!node.is_leaf() || node.var != static_cast<int>(i))
        mismatch(i, w, "expected leaf for this variable");
      map_.annotation[i] = w;
      map_.leaf_id[i] = w;
      return;
    }
    if (node.is_leaf()) mismatch(i, w, "expected internal node");
    const VtreeNode& left = v_.nodes[static_cast<std::size_t>(node.left)];
    if (!left.is_leaf() || left.var != static_cast<int>(i))
      mismatch(i, w, "left child must be this variable's leaf");
    map_.annotation[i] = w;
    map_.leaf_id[i] = node.left;
    pair_children(i, t_.children[i], 0, node.right);
  }

  void pair_children(std::size_t parent, const std::vector<std::size_t>& ch, std::size_t first,
                     int w) {
    if (first + 1 == ch.size()) {
      pair_node(ch[first], w);
      return;
    }
    const VtreeNode& node = v_.nodes[static_cast<std::size_t>(w)];
    if (node.is_leaf()) mismatch(parent, w, "chain node must be internal");
    map_.chain[parent].push_back(w);
    pair_node(ch[first], node.left);
    pair_children(parent, ch, first + 1, node.right);
  }

  const ChowLiuTree& t_;
  const Vtree& v_;
  CltVtreeMap map_;
};

class CltCompiler {
public:
  CltCompiler(const ChowLiuTree& t, const Vtree& v)
      : t_(t), map_(CltVtreePairing(t, v).run()) {
    out_.num_vars = t.num_vars;
    lit_cache_.assign(t.num_vars, {-1, -1});
    sub_.assign(t.num_vars, {-1, -1});
    branch_.assign(t.num_vars, {-1, -1});
  }

  Circuit run() {
    compile_node(t_.root);
    // The root has no parent configuration: one sum using the marginal.
    double p1 = t_.cpt[t_.root][0];
    out_.root = static_cast<std::size_t>(
        sum(map_.annotation[t_.root], branch_[t_.root][1], branch_[t_.root][0], p1));
    out_.assign_param_indices();
    return std::move(out_);
  }

private:
  int add_node(CircuitNode n) {
    out_.nodes.push_back(std::move(n));
    return static_cast<int>(out_.nodes.size() - 1);
  }

  int literal(std::size_t var, bool positive) {
    int& slot = positive ? lit_cache_[var][1] : lit_cache_[var][0];
    if (slot < 0) {
      CircuitNode n;
      n.kind = NodeKind::kLiteral;
      n.vtree_id = map_.leaf_id[var];
      n.var = static_cast<std::int32_t>(var);
      n.positive = positive;
      slot = add_node(std::move(n));
    }
    return slot;
  }

  int product(int vtree_id, int left, int right) {
    CircuitNode n;
    n.kind = NodeKind::kProduct;
    n.vtree_id = vtree_id;
    n.left = left;
    n.right = right;
    return add_node(std::move(n));
  }

  int sum(int vtree_id, int child_pos, int child_neg, double p1) {
    CircuitNode n;
    n.kind = NodeKind::kSum;
    n.vtree_id = vtree_id;
    n.edges.push_back({child_pos, std::log(p1), -1});
    n.edges.push_back({child_neg, std::log1p(-p1), -1});
    return add_node(std::move(n));
  }

  // Per CLT node i and value b, the shared branch child: the bare literal for
  // leaves, otherwise the product pairing the literal with the right-deep
  // chain over the children's sub-circuits conditioned on b.
  void compile_node(std::size_t i) {
    for (std::size_t c : t_.children[i]) compile_node(c);

    for (int b = 0; b < 2; ++b) {
      if (t_.is_leaf(i)) {
        branch_[i][b] = literal(i, b == 1);
      } else {
        int chain = chain_product(i, 0, b);
        branch_[i][b] = product(map_.annotation[i], literal(i, b == 1), chain);
      }
    }
    if (i != t_.root) {
      for (int pv = 0; pv < 2; ++pv) {
        sub_[i][pv] = sum(map_.annotation[i], branch_[i][1], branch_[i][0], t_.cpt[i][pv]);
      }
    }
  }

  int chain_product(std::size_t parent, std::size_t first, int b) {
    const auto& ch = t_.children[parent];
    if (first + 1 == ch.size()) return sub_[ch[first]][b];
    int left = sub_[ch[first]][b];
    int right = chain_product(parent, first + 1, b);
    return product(map_.chain[parent][first], left, right);
  }

  const ChowLiuTree& t_;
  CltVtreeMap map_;
  Circuit out_;
  std::vector<std::array<int, 2>> lit_cache_;  // [neg, pos]
  std::vector<std::array<int, 2>> sub_;        // sum per parent value
  std::vector<std::array<int, 2>> branch_;     // shared branch child per value
};

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = a > b ? a : b;
  double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

Circuit compile_clt(const ChowLiuTree& t, const Vtree& v) {
  return CltCompiler(t, v).run();
}

double evaluate_classical(const Circuit& c, const std::vector<bool>& assignment) {
  if (assignment.size() != c.num_vars)
    throw std::invalid_argument("assignment must cover all variables");
  std::vector<double> value(c.nodes.size());
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    switch (n.kind) {
      case NodeKind::kLiteral:
        value[i] = assignment[static_cast<std::size_t>(n.var)] == n.positive ? 0.0 : kNegInf;
        break;
      case NodeKind::kProduct:
        value[i] = value[static_cast<std::size_t>(n.left)] + value[static_cast<std::size_t>(n.right)];
        break;
      case NodeKind::kSum: {
        double acc = kNegInf;
        for (const auto& e : n.edges)
          acc = log_add(acc, e.log_weight + value[static_cast<std::size_t>(e.child)]);
        value[i] = acc;
        break;
      }
    }
  }
  return value[c.root];
}

std::vector<BitVector> compute_scopes(const Circuit& c) {
  std::vector<BitVector> scopes(c.nodes.size(), BitVector(c.num_vars));
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    switch (n.kind) {
      case NodeKind::kLiteral:
        scopes[i].set(static_cast<std::size_t>(n.var));
        break;
      case NodeKind::kProduct:
        scopes[i].or_with(scopes[static_cast<std::size_t>(n.left)]);
        scopes[i].or_with(scopes[static_cast<std::size_t>(n.right)]);
        break;
      case NodeKind::kSum:
        for (const auto& e : n.edges) scopes[i].or_with(scopes[static_cast<std::size_t>(e.child)]);
        break;
    }
  }
  return scopes;
}

ImpliedLiterals implied_literals(const Circuit& c) {
  ImpliedLiterals out;
  out.pos.assign(c.nodes.size(), BitVector(c.num_vars));
  out.neg.assign(c.nodes.size(), BitVector(c.num_vars));
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    switch (n.kind) {
      case NodeKind::kLiteral:
        (n.positive ? out.pos[i] : out.neg[i]).set(static_cast<std::size_t>(n.var));
        break;
      case NodeKind::kProduct:
        out.pos[i].or_with(out.pos[static_cast<std::size_t>(n.left)]);
        out.pos[i].or_with(out.pos[static_cast<std::size_t>(n.right)]);
        out.neg[i].or_with(out.neg[static_cast<std::size_t>(n.left)]);
        out.neg[i].or_with(out.neg[static_cast<std::size_t>(n.right)]);
        break;
      case NodeKind::kSum: {
        if (n.edges.empty()) break;
        out.pos[i] = out.pos[static_cast<std::size_t>(n.edges[0].child)];
        out.neg[i] = out.neg[static_cast<std::size_t>(n.edges[0].child)];
        for (std::size_t e = 1; e < n.edges.size(); ++e) {
          out.pos[i].and_with(out.pos[static_cast<std::size_t>(n.edges[e].child)]);
          out.neg[i].and_with(out.neg[static_cast<std::size_t>(n.edges[e].child)]);
        }
        break;
      }
    }
  }
  return out;
}

namespace {

bool sum_children_conflict(const ImpliedLiterals& lits, const CircuitNode& n) {
  for (std::size_t a = 0; a < n.edges.size(); ++a) {
    for (std::size_t b = a + 1; b < n.edges.size(); ++b) {
      std::size_t ca = static_cast<std::size_t>(n.edges[a].child);
      std::size_t cb = static_cast<std::size_t>(n.edges[b].child);
      if (count_and(lits.pos[ca], lits.neg[cb]) == 0 &&
          count_and(lits.neg[ca], lits.pos[cb]) == 0)
        return false;
    }
  }
  return true;
}

}  // namespace

bool is_structurally_deterministic(const Circuit& c) {
  ImpliedLiterals lits = implied_literals(c);
  for (const auto& n : c.nodes) {
    if (n.kind == NodeKind::kSum && !sum_children_conflict(lits, n)) return false;
  }
  return true;
}

StructureReport check_structure(const Circuit& c, const Vtree& v) {
  StructureReport report;
  report.smooth = report.decomposable = report.deterministic = report.structured = true;

  std::vector<BitVector> scopes = compute_scopes(c);
  ImpliedLiterals lits = implied_literals(c);
  std::vector<BitVector> vsets = vtree_var_sets(v, c.num_vars);

  auto violate = [&](bool& flag, std::size_t node, const std::string& reason) {
    flag = false;
    if (!report.first_violation) report.first_violation = StructureViolation{node, reason};
  };

  // subset test: a \subseteq b
  auto subset_of = [](const BitVector& a, const BitVector& b) {
    BitVector extra = a;
    extra.and_not_with(b);
    return !extra.any();
  };

  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    if (n.kind == NodeKind::kProduct) {
      std::size_t l = static_cast<std::size_t>(n.left), r = static_cast<std::size_t>(n.right);
      if (report.decomposable && count_and(scopes[l], scopes[r]) != 0)
        violate(report.decomposable, i, "product children share scope");
      bool ok = n.vtree_id >= 0 && static_cast<std::size_t>(n.vtree_id) < v.nodes.size() &&
                !v.nodes[static_cast<std::size_t>(n.vtree_id)].is_leaf();
      if (ok) {
        const VtreeNode& w = v.nodes[static_cast<std::size_t>(n.vtree_id)];
        ok = subset_of(scopes[l], vsets[static_cast<std::size_t>(w.left)]) &&
             subset_of(scopes[r], vsets[static_cast<std::size_t>(w.right)]);
      }
      if (report.structured && !ok)
        violate(report.structured, i, "product scope split disagrees with its vtree node");
    } else if (n.kind == NodeKind::kSum) {
      for (const auto& e : n.edges) {
        if (!(scopes[static_cast<std::size_t>(e.child)] ==
              scopes[static_cast<std::size_t>(n.edges[0].child)])) {
          if (report.smooth) violate(report.smooth, i, "sum children scopes differ");
          break;
        }
      }
      if (report.deterministic && !sum_children_conflict(lits, n))
        violate(report.deterministic, i,
                "sum children are not conditioned on conflicting literals");
    }
  }
  return report;
}

void write_circuit(const Circuit& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write circuit file: " + path);
  char buf[64];
  out << "c circuit: L <id> <vtreeId> <lit>, P <id> <vtreeId> <left> <right>,\n";
  out << "c          S <id> <vtreeId> <k> <child> <logWeight> ...; root last\n";
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    switch (n.kind) {
      case NodeKind::kLiteral: {
        long lit = (n.var + 1) * (n.positive ? 1 : -1);
        out << "L " << i << ' ' << n.vtree_id << ' ' << lit << '\n';
        break;
      }
      case NodeKind::kProduct:
        out << "P " << i << ' ' << n.vtree_id << ' ' << n.left << ' ' << n.right << '\n';
        break;
      case NodeKind::kSum: {
        out << "S " << i << ' ' << n.vtree_id << ' ' << n.edges.size();
        for (const auto& e : n.edges) {
          std::snprintf(buf, sizeof buf, "%.17g", e.log_weight);
          out << ' ' << e.child << ' ' << buf;
        }
        out << '\n';
        break;
      }
    }
  }
}

Circuit read_circuit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open circuit file: " + path);
  Circuit c;
  std::unordered_map<long, std::int32_t> id_map;
  long max_var = 0;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ParseError("circuit line " + std::to_string(line_no) + ": " + msg);
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
    CircuitNode n;
    long id;
    if (tag == 'L') {
      long lit;
      if (!(ss >> id >> n.vtree_id >> lit) || lit == 0) fail("malformed literal line");
      n.kind = NodeKind::kLiteral;
      n.positive = lit > 0;
      n.var = static_cast<std::int32_t>((lit > 0 ? lit : -lit) - 1);
      max_var = std::max(max_var, lit > 0 ? lit : -lit);
    } else if (tag == 'P') {
      long l, r;
      if (!(ss >> id >> n.vtree_id >> l >> r)) fail("malformed product line");
      n.kind = NodeKind::kProduct;
      n.left = resolve(l);
      n.right = resolve(r);
    } else if (tag == 'S') {
      std::size_t k;
      if (!(ss >> id >> n.vtree_id >> k) || k == 0) fail("malformed sum line");
      n.kind = NodeKind::kSum;
      for (std::size_t e = 0; e < k; ++e) {
        long child;
        double lw;
        if (!(ss >> child >> lw)) fail("malformed sum edge");
        n.edges.push_back({resolve(child), lw, -1});
      }
    } else {
      fail(std::string("unknown node tag '") + tag + "'");
    }
    if (!id_map.emplace(id, static_cast<std::int32_t>(c.nodes.size())).second)
      fail("duplicate id");
    c.nodes.push_back(std::move(n));
  }
  if (c.nodes.empty()) throw ParseError("circuit file has no nodes: " + path);
  c.root = c.nodes.size() - 1;
  c.num_vars = static_cast<std::size_t>(max_var);
  c.assign_param_indices();
  return c;
}

}  // namespace strudel
