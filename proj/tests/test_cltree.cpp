#include "strudel/cltree.hpp"

#include <cmath>

#include "doctest.h"
#include "oracle_helpers.hpp"

using namespace strudel;

TEST_CASE("estimate_mi: independent fair columns have zero MI") {
  Dataset d = oracle::dataset_from_rows({{false, false}, {false, true}, {true, false}, {true, true}});
  MutualInfoMatrix mi = estimate_mi(d, 0.0);
  CHECK(mi.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("estimate_mi: identical fair columns have MI log 2") {
  Dataset d = oracle::dataset_from_rows({{false, false}, {false, false}, {true, true}, {true, true}});
  MutualInfoMatrix mi = estimate_mi(d, 0.0);
  CHECK(mi.at(0, 1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("estimate_mi matches the tabulated-count oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Dataset d = oracle::random_dataset(rng, 3, 8);
    auto rows = oracle::rows_of(d);
    MutualInfoMatrix mi = estimate_mi(d, 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = i + 1; j < 3; ++j) {
        CHECK(mi.at(i, j) == doctest::Approx(oracle::brute_mi(rows, nullptr, i, j, 1.0)));
      }
    }
  }
}

TEST_CASE("estimate_mi handles weighted counts") {
  Rng rng(12);
  Dataset d0 = oracle::random_dataset(rng, 4, 30);
  std::vector<double> w;
  for (std::size_t i = 0; i < 30; ++i) w.push_back(0.25 * static_cast<double>(rng.below(8)));
  w[0] = 1.0;  // keep some mass
  Dataset d = d0.with_weights(w);
  auto rows = oracle::rows_of(d);
  MutualInfoMatrix mi = estimate_mi(d, 0.5);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      CHECK(mi.at(i, j) == doctest::Approx(oracle::brute_mi(rows, &w, i, j, 0.5)));
    }
  }
}

TEST_CASE("estimate_mi is symmetric and row-order invariant") {
  Rng rng(13);
  Dataset d = oracle::random_dataset(rng, 5, 40);
  auto rows = oracle::rows_of(d);
  std::vector<std::vector<bool>> reversed(rows.rbegin(), rows.rend());
  Dataset d2 = oracle::dataset_from_rows(reversed);
  MutualInfoMatrix a = estimate_mi(d, 1.0);
  MutualInfoMatrix b = estimate_mi(d2, 1.0);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(a.at(i, j) == doctest::Approx(a.at(j, i)));
      CHECK(a.at(i, j) == doctest::Approx(b.at(i, j)));
    }
  }
}

TEST_CASE("maximum_spanning_tree: single variable yields no edges") {
  MutualInfoMatrix mi(1);
  CHECK(maximum_spanning_tree(mi).empty());
}

TEST_CASE("maximum_spanning_tree picks the forced optimum") {
  MutualInfoMatrix mi(3);
  mi.set(0, 1, 0.5);
  mi.set(0, 2, 0.3);
  mi.set(1, 2, 0.1);
  auto edges = maximum_spanning_tree(mi);
  REQUIRE(edges.size() == 2);
  CHECK(edges[0] == UndirectedEdge{0, 1});
  CHECK(edges[1] == UndirectedEdge{0, 2});
}

TEST_CASE("maximum_spanning_tree matches exhaustive enumeration on 5 vertices") {
  Rng rng(17);
  auto trees = oracle::all_labeled_trees(5);
  REQUIRE(trees.size() == 125);  // Cayley: 5^3
  for (int rep = 0; rep < 10; ++rep) {
    MutualInfoMatrix mi(5);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = i + 1; j < 5; ++j) mi.set(i, j, rng.unit());
    }
    auto got = maximum_spanning_tree(mi);
    double got_weight = 0.0;
    for (const auto& e : got) got_weight += mi.at(e.a, e.b);
    double best = -1.0;
    for (const auto& t : trees) {
      double w = 0.0;
      for (const auto& e : t) w += mi.at(e.a, e.b);
      best = std::max(best, w);
    }
    CHECK(got_weight == doctest::Approx(best));
  }
}

TEST_CASE("root_at_jordan_center") {
  SUBCASE("odd path has a unique center") {
    std::vector<UndirectedEdge> path{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
    CHECK(root_at_jordan_center(5, path) == 2);
  }
  SUBCASE("even path breaks the tie toward the smaller index") {
    std::vector<UndirectedEdge> path{{0, 1}, {1, 2}, {2, 3}};
    CHECK(root_at_jordan_center(4, path) == 1);
  }
  SUBCASE("star is centered at the hub") {
    std::vector<UndirectedEdge> star{{0, 3}, {1, 3}, {2, 3}, {3, 4}};
    CHECK(root_at_jordan_center(5, star) == 3);
  }
}

TEST_CASE("learn_clt: single-variable marginal is the frequency") {
  Dataset d = oracle::dataset_from_rows({{true}, {true}, {false}});
  ChowLiuTree t = learn_clt(d, 0.0);
  CHECK(t.root == 0);
  CHECK(t.cpt[0][0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("Fig-style CLT chain rule sanity") {
  // Hand-constructed CLT: X4 root, X3 under X4, X1 and X2 under X3.
  ChowLiuTree t;
  t.num_vars = 4;
  t.root = 3;
  t.parent = {2, 2, 3, -1};
  t.children = {{}, {}, {0, 1}, {2}};
  t.cpt = {{0.7, 0.4}, {0.5, 0.9}, {0.8, 0.3}, {0.4, 0.4}};
  CHECK(std::exp(oracle::clt_log_joint(t, {true, false, true, false})) ==
        doctest::Approx(0.0192).epsilon(1e-12));
}

TEST_CASE("learn_clt beats every labeled spanning tree on training LL") {
  // Exact Chow-Liu optimality holds for the unsmoothed fit; an unsmoothed
  // MLE fit also dominates every smoothed fit of every tree, so the
  // learner at alpha=0 must beat both oracle variants.
  Rng rng(23);
  auto trees = oracle::all_labeled_trees(4);
  REQUIRE(trees.size() == 16);
  for (int rep = 0; rep < 10; ++rep) {
    std::size_t n = 8 + rng.below(57);  // up to 64 samples
    Dataset d = oracle::random_dataset(rng, 4, n);
    auto rows = oracle::rows_of(d);
    ChowLiuTree learned = learn_clt(d, 0.0);
    double learned_ll = oracle::tree_train_ll(rows, learned);
    for (const auto& edges : trees) {
      for (std::size_t root = 0; root < 4; ++root) {
        for (double alpha : {0.0, 1.0}) {
          ChowLiuTree alt = oracle::fit_tree_cpts(rows, 4, edges, root, alpha);
          double alt_ll = oracle::tree_train_ll(rows, alt);
          CHECK(learned_ll >= alt_ll - 1e-9);
        }
      }
    }
  }
}

TEST_CASE("CLT joint distribution is normalized") {
  Rng rng(29);
  for (std::size_t m : {1, 3, 7, 10}) {
    ChowLiuTree t = oracle::random_clt(rng, m);
    double total = 0.0;
    oracle::enumerate_assignments(m, [&](const std::vector<bool>& x) {
      total += std::exp(oracle::clt_log_joint(t, x));
    });
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("learn_clt structure is a tree rooted at the Jordan center") {
  Rng rng(31);
  Dataset d = oracle::random_dataset(rng, 8, 100);
  ChowLiuTree t = learn_clt(d, 1.0);
  CHECK(t.parent[t.root] == -1);
  std::size_t with_parent = 0;
  for (std::size_t i = 0; i < t.num_vars; ++i) {
    if (t.parent[i] >= 0) ++with_parent;
  }
  CHECK(with_parent == t.num_vars - 1);
  for (std::size_t i = 0; i < t.num_vars; ++i) {
    for (double p : t.cpt[i]) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}
