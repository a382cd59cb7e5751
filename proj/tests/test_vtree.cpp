#include "strudel/vtree.hpp"

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "oracle_helpers.hpp"

using namespace strudel;

namespace {

ChowLiuTree chain_clt(std::vector<std::size_t> order) {
  // order is a permutation of 0..n-1; order[0] is the root, each node
  // parents the next.
  ChowLiuTree t;
  t.num_vars = order.size();
  t.root = order[0];
  t.parent.assign(t.num_vars, -1);
  t.children.assign(t.num_vars, {});
  t.cpt.assign(t.num_vars, {0.5, 0.5});
  for (std::size_t i = 1; i < order.size(); ++i) {
    t.parent[order[i]] = static_cast<int>(order[i - 1]);
    t.children[order[i - 1]].push_back(order[i]);
  }
  return t;
}

}  // namespace

TEST_CASE("vtree_from_clt: single variable") {
  ChowLiuTree t = chain_clt({0});
  Vtree v = vtree_from_clt(t);
  REQUIRE(v.nodes.size() == 1);
  CHECK(v.nodes[0].is_leaf());
  CHECK(v.nodes[0].var == 0);
  CHECK_FALSE(validate_vtree(v).has_value());
}

TEST_CASE("vtree_from_clt: a chain root->mid->leaf gives (root, (mid, leaf))") {
  ChowLiuTree t = chain_clt({2, 1, 0});
  Vtree v = vtree_from_clt(t);
  const VtreeNode& root = v.nodes[v.root];
  REQUIRE_FALSE(root.is_leaf());
  CHECK(v.nodes[static_cast<std::size_t>(root.left)].var == 2);
  const VtreeNode& right = v.nodes[static_cast<std::size_t>(root.right)];
  REQUIRE_FALSE(right.is_leaf());
  CHECK(v.nodes[static_cast<std::size_t>(right.left)].var == 1);
  CHECK(v.nodes[static_cast<std::size_t>(right.right)].var == 0);
}

TEST_CASE("vtree_from_clt: Fig-style tree puts the root variable against the rest") {
  ChowLiuTree t;
  t.num_vars = 4;
  t.root = 3;
  t.parent = {2, 2, 3, -1};
  t.children = {{}, {}, {0, 1}, {2}};
  t.cpt.assign(4, {0.5, 0.5});
  Vtree v = vtree_from_clt(t);
  CHECK(v.nodes.size() == 7);
  CHECK_FALSE(validate_vtree(v).has_value());
  const VtreeNode& root = v.nodes[v.root];
  REQUIRE_FALSE(root.is_leaf());
  CHECK(v.nodes[static_cast<std::size_t>(root.left)].var == 3);  // X4 leaf on the left
  // right branch covers the remaining three variables
  auto sets = vtree_var_sets(v, 4);
  CHECK(sets[static_cast<std::size_t>(root.right)].count() == 3);
  CHECK_FALSE(sets[static_cast<std::size_t>(root.right)].get(3));
  // children of X3's internal node: X3 leaf left, {X1,X2} right
  const VtreeNode& x3node = v.nodes[static_cast<std::size_t>(root.right)];
  CHECK(v.nodes[static_cast<std::size_t>(x3node.left)].var == 2);
  CHECK(sets[static_cast<std::size_t>(x3node.right)].count() == 2);
}

TEST_CASE("vtree_from_clt has 2m-1 nodes and bounded depth") {
  Rng rng(41);
  for (std::size_t m : {2, 5, 16, 64}) {
    ChowLiuTree t = oracle::random_clt(rng, m);
    Vtree v = vtree_from_clt(t);
    CHECK(v.nodes.size() == 2 * m - 1);
    CHECK_FALSE(validate_vtree(v).has_value());
    // depth bound: no deeper than the variable count
    std::vector<std::size_t> depth(v.nodes.size(), 0);
    std::size_t max_depth = 0;
    for (std::size_t i = v.nodes.size(); i-- > 0;) {
      const VtreeNode& n = v.nodes[i];
      if (!n.is_leaf()) {
        depth[static_cast<std::size_t>(n.left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(n.right)] = depth[i] + 1;
      }
      max_depth = std::max(max_depth, depth[i]);
    }
    CHECK(max_depth <= m);
  }
}

TEST_CASE("validate_vtree flags broken trees") {
  SUBCASE("internal with one child") {
    Vtree v;
    v.nodes.push_back({-1, -1, 0});
    v.nodes.push_back({0, -1, -1});
    v.root = 1;
    auto violation = validate_vtree(v);
    REQUIRE(violation.has_value());
    CHECK(violation->reason.find("not full binary") != std::string::npos);
  }
  SUBCASE("duplicate variable") {
    Vtree v;
    v.nodes.push_back({-1, -1, 0});
    v.nodes.push_back({-1, -1, 0});
    v.nodes.push_back({0, 1, -1});
    v.root = 2;
    auto violation = validate_vtree(v);
    REQUIRE(violation.has_value());
    CHECK(violation->reason.find("variable multiplicity") != std::string::npos);
  }
}

TEST_CASE("vtree io round-trips") {
  Rng rng(43);
  ChowLiuTree t = oracle::random_clt(rng, 9);
  Vtree v = vtree_from_clt(t);
  write_vtree(v, "vtree_roundtrip.tmp");
  Vtree v2 = read_vtree("vtree_roundtrip.tmp");
  REQUIRE(v2.nodes.size() == v.nodes.size());
  CHECK(v2.root == v.root);
  for (std::size_t i = 0; i < v.nodes.size(); ++i) {
    CHECK(v.nodes[i].left == v2.nodes[i].left);
    CHECK(v.nodes[i].right == v2.nodes[i].right);
    CHECK(v.nodes[i].var == v2.nodes[i].var);
  }
  write_vtree(v2, "vtree_roundtrip2.tmp");
  std::ifstream f1("vtree_roundtrip.tmp"), f2("vtree_roundtrip2.tmp");
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::remove("vtree_roundtrip.tmp");
  std::remove("vtree_roundtrip2.tmp");
}

TEST_CASE("read_vtree rejects malformed files") {
  {
    std::ofstream out("vtree_bad.tmp");
    out << "L 0 1\nX 1 0 0\n";
  }
  CHECK_THROWS_AS(read_vtree("vtree_bad.tmp"), ParseError);
  std::remove("vtree_bad.tmp");
}
