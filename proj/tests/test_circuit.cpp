#include "strudel/circuit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "oracle_helpers.hpp"

using namespace strudel;

namespace {

// The running four-variable example: X4 root; X3 under X4; X1, X2 under X3.
// Indices are zero-based (X_k -> k-1).
ChowLiuTree example_clt() {
  ChowLiuTree t;
  t.num_vars = 4;
  t.root = 3;
  t.parent = {2, 2, 3, -1};
  t.children = {{}, {}, {0, 1}, {2}};
  t.cpt = {{0.7, 0.4}, {0.5, 0.9}, {0.8, 0.3}, {0.4, 0.4}};
  return t;
}

}  // namespace

TEST_CASE("compile_clt reproduces the hand-computed joints") {
  ChowLiuTree t = example_clt();
  Vtree v = vtree_from_clt(t);
  Circuit c = compile_clt(t, v);
  CHECK(std::exp(evaluate_classical(c, {true, false, true, false})) ==
        doctest::Approx(0.0192).epsilon(1e-12));
  CHECK(std::exp(evaluate_classical(c, {true, true, true, true})) ==
        doctest::Approx(0.0432).epsilon(1e-12));
  CHECK(std::exp(evaluate_classical(c, {false, false, false, false})) ==
        doctest::Approx(0.0180).epsilon(1e-12));
}

TEST_CASE("compile_clt rejects a mismatched vtree") {
  ChowLiuTree t = example_clt();
  ChowLiuTree other = t;
  other.root = 2;
  other.parent = {2, 2, -1, 2};
  other.children = {{}, {}, {0, 1, 3}, {}};
  Vtree wrong = vtree_from_clt(other);
  CHECK_THROWS_WITH_AS(compile_clt(t, wrong), doctest::Contains("vtree mismatch"),
                       std::runtime_error);
}

TEST_CASE("single-variable CLT compiles to one sum over both literals") {
  ChowLiuTree t;
  t.num_vars = 1;
  t.root = 0;
  t.parent = {-1};
  t.children = {{}};
  t.cpt = {{0.4, 0.4}};
  Circuit c = compile_clt(t, vtree_from_clt(t));
  REQUIRE(c.nodes.size() == 3);
  const CircuitNode& root = c.nodes[c.root];
  REQUIRE(root.kind == NodeKind::kSum);
  REQUIRE(root.edges.size() == 2);
  CHECK(std::exp(root.edges[0].log_weight) == doctest::Approx(0.4));
  CHECK(std::exp(root.edges[1].log_weight) == doctest::Approx(0.6));
  CHECK(c.nodes[static_cast<std::size_t>(root.edges[0].child)].positive);
  CHECK_FALSE(c.nodes[static_cast<std::size_t>(root.edges[1].child)].positive);
}

TEST_CASE("chain CLT circuits grow linearly") {
  Rng rng(51);
  double first_ratio = 0.0;
  for (std::size_t m : {4, 8, 16, 32}) {
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    ChowLiuTree t;
    t.num_vars = m;
    t.root = 0;
    t.parent.assign(m, -1);
    t.children.assign(m, {});
    t.cpt.assign(m, {0.0, 0.0});
    for (std::size_t i = 1; i < m; ++i) {
      t.parent[i] = static_cast<int>(i - 1);
      t.children[i - 1].push_back(i);
    }
    for (std::size_t i = 0; i < m; ++i)
      t.cpt[i] = {0.1 + 0.8 * rng.unit(), 0.1 + 0.8 * rng.unit()};
    t.cpt[0][1] = t.cpt[0][0];
    Circuit c = compile_clt(t, vtree_from_clt(t));
    double ratio = static_cast<double>(c.nodes.size()) / static_cast<double>(m);
    if (first_ratio == 0.0) first_ratio = ratio;
    // measured constant: (6m - 3) / m, within one node per variable
    CHECK(std::abs(ratio - first_ratio) <= 1.0);
    CHECK(c.nodes.size() == 6 * m - 3);
  }
}

TEST_CASE("compiled circuits agree with the chain rule everywhere") {
  Rng rng(53);
  for (std::size_t m : {2, 5, 8, 10}) {
    ChowLiuTree t = oracle::random_clt(rng, m);
    Circuit c = compile_clt(t, vtree_from_clt(t));
    oracle::enumerate_assignments(m, [&](const std::vector<bool>& x) {
      CHECK(evaluate_classical(c, x) ==
            doctest::Approx(oracle::clt_log_joint(t, x)).epsilon(1e-9));
    });
  }
}

TEST_CASE("compiled circuits agree with the chain rule on samples for larger m") {
  Rng rng(54);
  ChowLiuTree t = oracle::random_clt(rng, 40);
  Circuit c = compile_clt(t, vtree_from_clt(t));
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<bool> x(40);
    for (std::size_t v = 0; v < 40; ++v) x[v] = rng.below(2) == 1;
    CHECK(evaluate_classical(c, x) ==
          doctest::Approx(oracle::clt_log_joint(t, x)).epsilon(1e-9));
  }
}

TEST_CASE("compiled circuits are normalized") {
  Rng rng(55);
  for (std::size_t m : {1, 4, 9}) {
    ChowLiuTree t = oracle::random_clt(rng, m);
    Circuit c = compile_clt(t, vtree_from_clt(t));
    CHECK(oracle::sum_over_assignments(c) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("check_structure approves compiled circuits") {
  Rng rng(57);
  for (int rep = 0; rep < 10; ++rep) {
    std::size_t m = 2 + rng.below(9);
    ChowLiuTree t = oracle::random_clt(rng, m);
    Vtree v = vtree_from_clt(t);
    Circuit c = compile_clt(t, v);
    StructureReport r = check_structure(c, v);
    CHECK(r.smooth);
    CHECK(r.decomposable);
    CHECK(r.deterministic);
    CHECK(r.structured);
    CHECK(r.all());
  }
}

TEST_CASE("check_structure catches a non-deterministic sum") {
  // Both products under the root assert the same branch literal X0=1; their
  // other sides are unrestricted sums over X1, so their supports overlap.
  Circuit c;
  c.num_vars = 2;
  c.nodes.push_back({NodeKind::kLiteral, 0, 0, true, -1, -1, {}});
  c.nodes.push_back({NodeKind::kLiteral, 1, 1, true, -1, -1, {}});
  c.nodes.push_back({NodeKind::kLiteral, 1, 1, false, -1, -1, {}});
  CircuitNode s1;
  s1.kind = NodeKind::kSum;
  s1.vtree_id = 1;
  s1.edges = {{1, std::log(0.5), -1}, {2, std::log(0.5), -1}};
  c.nodes.push_back(s1);
  CircuitNode s2;
  s2.kind = NodeKind::kSum;
  s2.vtree_id = 1;
  s2.edges = {{1, std::log(0.25), -1}, {2, std::log(0.75), -1}};
  c.nodes.push_back(s2);
  c.nodes.push_back({NodeKind::kProduct, 2, -1, true, 0, 3, {}});
  c.nodes.push_back({NodeKind::kProduct, 2, -1, true, 0, 4, {}});
  CircuitNode root;
  root.kind = NodeKind::kSum;
  root.vtree_id = 2;
  root.edges = {{5, std::log(0.5), -1}, {6, std::log(0.5), -1}};
  c.nodes.push_back(root);
  c.root = 7;
  c.assign_param_indices();

  Vtree v;
  v.nodes.push_back({-1, -1, 0});
  v.nodes.push_back({-1, -1, 1});
  v.nodes.push_back({0, 1, -1});
  v.root = 2;

  StructureReport r = check_structure(c, v);
  CHECK(r.smooth);
  CHECK(r.decomposable);
  CHECK(r.structured);
  CHECK_FALSE(r.deterministic);
  REQUIRE(r.first_violation.has_value());
  CHECK(r.first_violation->node == 7);
}

TEST_CASE("check_structure catches a vtree-violating product") {
  // product splits {X0}|{X1} but is annotated with a vtree node expecting
  // {X1}|{X0}
  Circuit c;
  c.num_vars = 2;
  c.nodes.push_back({NodeKind::kLiteral, 0, 0, true, -1, -1, {}});
  c.nodes.push_back({NodeKind::kLiteral, 1, 1, true, -1, -1, {}});
  c.nodes.push_back({NodeKind::kProduct, 2, -1, true, 0, 1, {}});
  c.root = 2;
  c.assign_param_indices();

  Vtree v;
  v.nodes.push_back({-1, -1, 1});
  v.nodes.push_back({-1, -1, 0});
  v.nodes.push_back({0, 1, -1});
  v.root = 2;

  StructureReport r = check_structure(c, v);
  CHECK_FALSE(r.structured);
  CHECK(r.decomposable);  // scopes are still disjoint
}

TEST_CASE("circuit io round-trips bit-identically") {
  ChowLiuTree t = example_clt();
  Vtree v = vtree_from_clt(t);
  Circuit c = compile_clt(t, v);
  write_circuit(c, "circuit_roundtrip.tmp");
  Circuit c2 = read_circuit("circuit_roundtrip.tmp");
  write_circuit(c2, "circuit_roundtrip2.tmp");
  std::ifstream f1("circuit_roundtrip.tmp"), f2("circuit_roundtrip2.tmp");
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(c2.num_vars == c.num_vars);
  CHECK(c2.num_params == c.num_params);
  oracle::enumerate_assignments(4, [&](const std::vector<bool>& x) {
    CHECK(evaluate_classical(c, x) == doctest::Approx(evaluate_classical(c2, x)));
  });
  std::remove("circuit_roundtrip.tmp");
  std::remove("circuit_roundtrip2.tmp");
}

TEST_CASE("read_circuit rejects unknown node tags") {
  {
    std::ofstream out("circuit_bad.tmp");
    out << "L 0 0 1\nQ 1 0 0\n";
  }
  CHECK_THROWS_WITH_AS(read_circuit("circuit_bad.tmp"), doctest::Contains("line 2"), ParseError);
  std::remove("circuit_bad.tmp");
}
