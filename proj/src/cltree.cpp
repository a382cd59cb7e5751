#include "strudel/cltree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace strudel {

namespace {

// x * log(x / y), with the 0 * log(0) := 0 convention.
double xlogxy(double x, double y) {
  if (x <= 0.0) return 0.0;
  return x * std::log(x / y);
}

double mi_from_counts(const PairCounts& c, double total, double alpha) {
  const double base = total + 4.0 * alpha;
  const double p00 = (c.c00 + alpha) / base;
  const double p01 = (c.c01 + alpha) / base;
  const double p10 = (c.c10 + alpha) / base;
  const double p11 = (c.c11 + alpha) / base;
  const double pi0 = p00 + p01, pi1 = p10 + p11;
  const double pj0 = p00 + p10, pj1 = p01 + p11;
  return xlogxy(p00, pi0 * pj0) + xlogxy(p01, pi0 * pj1) + xlogxy(p10, pi1 * pj0) +
         xlogxy(p11, pi1 * pj1);
}

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

PairCounts pair_counts(const Dataset& d, std::size_t i, std::size_t j, const BitVector* mask) {
  const BitVector& ci = d.column(i);
  const BitVector& cj = d.column(j);
  PairCounts out;
  if (!d.has_weights()) {
    double n11, n10, n01, total;
    if (mask) {
      n11 = static_cast<double>(count_and3(ci, cj, *mask));
      n10 = static_cast<double>(count_and(ci, *mask)) - n11;
      n01 = static_cast<double>(count_and(cj, *mask)) - n11;
      total = static_cast<double>(mask->count());
    } else {
      n11 = static_cast<double>(count_and(ci, cj));
      n10 = static_cast<double>(ci.count()) - n11;
      n01 = static_cast<double>(cj.count()) - n11;
      total = static_cast<double>(d.num_samples());
    }
    out.c11 = n11;
    out.c10 = n10;
    out.c01 = n01;
    out.c00 = total - n11 - n10 - n01;
    return out;
  }
  const auto& w = d.weights();
  const std::uint64_t* pi = ci.data();
  const std::uint64_t* pj = cj.data();
  for (std::size_t wi = 0; wi < ci.num_words(); ++wi) {
    std::uint64_t sel = mask ? mask->data()[wi] : ~0ull;
    if (wi == ci.num_words() - 1 && (d.num_samples() & 63))
      sel &= (1ull << (d.num_samples() & 63)) - 1;
    while (sel) {
      unsigned b = std::countr_zero(sel);
      sel &= sel - 1;
      std::size_t s = wi * 64 + b;
      bool vi = (pi[wi] >> b) & 1u;
      bool vj = (pj[wi] >> b) & 1u;
      double* cell = vi ? (vj ? &out.c11 : &out.c10) : (vj ? &out.c01 : &out.c00);
      *cell += w[s];
    }
  }
  return out;
}

MutualInfoMatrix estimate_mi(const Dataset& d, double alpha) {
  const std::size_t m = d.num_vars();
  const double total = d.total_weight();
  MutualInfoMatrix mi(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      mi.set(i, j, mi_from_counts(pair_counts(d, i, j), total, alpha));
    }
  }
  return mi;
}

MutualInfoMatrix estimate_mi_subset(const Dataset& d, double alpha,
                                    const std::vector<std::size_t>& vars, const BitVector* mask) {
  if (mask && !mask->any()) mask = nullptr;  // empty subset: fall back to all samples
  double total;
  if (!mask) {
    total = d.total_weight();
  } else if (d.has_weights()) {
    total = weighted_count(*mask, d.weights());
  } else {
    total = static_cast<double>(mask->count());
  }
  MutualInfoMatrix mi(vars.size());
  for (std::size_t a = 0; a < vars.size(); ++a) {
    for (std::size_t b = a + 1; b < vars.size(); ++b) {
      mi.set(a, b, mi_from_counts(pair_counts(d, vars[a], vars[b], mask), total, alpha));
    }
  }
  return mi;
}

std::vector<UndirectedEdge> maximum_spanning_tree(const MutualInfoMatrix& mi) {
  const std::size_t m = mi.num_vars;
  std::vector<UndirectedEdge> all;
  all.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) all.push_back({i, j});
  }
  std::sort(all.begin(), all.end(), [&](const UndirectedEdge& x, const UndirectedEdge& y) {
    double wx = mi.at(x.a, x.b), wy = mi.at(y.a, y.b);
    if (wx != wy) return wx > wy;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  DisjointSet ds(m);
  std::vector<UndirectedEdge> tree;
  tree.reserve(m > 0 ? m - 1 : 0);
  for (const auto& e : all) {
    if (ds.unite(e.a, e.b)) {
      tree.push_back(e);
      if (tree.size() + 1 == m) break;
    }
  }
  return tree;
}

std::size_t root_at_jordan_center(std::size_t num_vars, const std::vector<UndirectedEdge>& edges) {
  if (num_vars == 1) return 0;
  std::vector<std::vector<std::size_t>> adj(num_vars);
  for (const auto& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::size_t best = 0;
  std::size_t best_ecc = ~std::size_t{0};
  std::vector<std::size_t> dist(num_vars);
  for (std::size_t src = 0; src < num_vars; ++src) {
    std::fill(dist.begin(), dist.end(), ~std::size_t{0});
    dist[src] = 0;
    std::deque<std::size_t> queue{src};
    std::size_t ecc = 0;
    while (!queue.empty()) {
      std::size_t u = queue.front();
      queue.pop_front();
      ecc = std::max(ecc, dist[u]);
      for (std::size_t v : adj[u]) {
        if (dist[v] == ~std::size_t{0}) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      }
    }
    if (ecc < best_ecc) {
      best_ecc = ecc;
      best = src;
    }
  }
  return best;
}

ChowLiuTree learn_clt(const Dataset& d, double alpha) {
  const std::size_t m = d.num_vars();
  const double total = d.total_weight();
  MutualInfoMatrix mi = estimate_mi(d, alpha);
  std::vector<UndirectedEdge> edges = maximum_spanning_tree(mi);
  std::size_t root = root_at_jordan_center(m, edges);

  ChowLiuTree t;
  t.num_vars = m;
  t.root = root;
  t.parent.assign(m, -1);
  t.cpt.assign(m, {0.0, 0.0});
  t.children.assign(m, {});

  std::vector<std::vector<std::size_t>> adj(m);
  for (const auto& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::deque<std::size_t> queue{root};
  std::vector<bool> seen(m, false);
  seen[root] = true;
  while (!queue.empty()) {
    std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        t.parent[v] = static_cast<int>(u);
        t.children[u].push_back(v);
        queue.push_back(v);
      }
    }
  }
  for (auto& ch : t.children) std::sort(ch.begin(), ch.end());

  // Root marginal with a 2-alpha denominator correction; conditionals share
  // the same Laplace factor.
  double c1;
  if (d.has_weights()) {
    c1 = weighted_count(d.column(root), d.weights());
  } else {
    c1 = static_cast<double>(d.column(root).count());
  }
  double marginal = (c1 + alpha) / (total + 2.0 * alpha);
  t.cpt[root] = {marginal, marginal};

  for (std::size_t i = 0; i < m; ++i) {
    if (static_cast<std::size_t>(i) == root) continue;
    std::size_t p = static_cast<std::size_t>(t.parent[i]);
    PairCounts c = pair_counts(d, i, p);
    double parent0 = c.c00 + c.c10;
    double parent1 = c.c01 + c.c11;
    t.cpt[i][0] = (c.c10 + alpha) / (parent0 + 2.0 * alpha);
    t.cpt[i][1] = (c.c11 + alpha) / (parent1 + 2.0 * alpha);
  }
  return t;
}

}  // namespace strudel
