#include "strudel/search.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace strudel {

std::optional<Heuristic> heuristic_from_name(const std::string& name) {
  if (name == "eflow-vmi") return Heuristic::kEflowVmi;
  if (name == "eflow-vrand") return Heuristic::kEflowVrand;
  if (name == "erand-vmi") return Heuristic::kErandVmi;
  if (name == "erand-vrand") return Heuristic::kErandVrand;
  return std::nullopt;
}

std::string heuristic_name(Heuristic h) {
  switch (h) {
    case Heuristic::kEflowVmi: return "eflow-vmi";
    case Heuristic::kEflowVrand: return "eflow-vrand";
    case Heuristic::kErandVmi: return "erand-vmi";
    case Heuristic::kErandVrand: return "erand-vrand";
  }
  return "?";
}

LiteralOccurrence literal_occurrence(const Circuit& c) {
  LiteralOccurrence out;
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
      case NodeKind::kSum:
        for (const auto& e : n.edges) {
          out.pos[i].or_with(out.pos[static_cast<std::size_t>(e.child)]);
          out.neg[i].or_with(out.neg[static_cast<std::size_t>(e.child)]);
        }
        break;
    }
  }
  return out;
}

std::vector<SplitCandidate> split_candidates(const Circuit& c) {
  LiteralOccurrence occ = literal_occurrence(c);
  std::vector<SplitCandidate> out;
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    if (n.kind != NodeKind::kSum) continue;
    for (std::size_t e = 0; e < n.edges.size(); ++e) {
      std::size_t child = static_cast<std::size_t>(n.edges[e].child);
      if (c.nodes[child].kind != NodeKind::kProduct) continue;
      if (occ.splittable(child).any()) out.push_back({i, e});
    }
  }
  return out;
}

std::optional<std::size_t> score_edge_eflow(const Circuit& c, const AggregateFlows& a,
                                            const std::vector<SplitCandidate>& candidates) {
  if (candidates.empty()) return std::nullopt;
  std::size_t best = 0;
  double best_flow = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    std::int32_t param = c.nodes[cand.sum_id].edges[cand.child_index].param;
    double flow = a.counts[static_cast<std::size_t>(param)];
    if (flow > best_flow) {
      best_flow = flow;
      best = i;
    }
  }
  return best;
}

std::size_t score_random(std::size_t count, Rng& rng) {
  if (count == 0) throw std::invalid_argument("cannot draw from an empty candidate set");
  return static_cast<std::size_t>(rng.below(count));
}

std::size_t score_var_vmi(const Circuit& c, const Dataset& d, double alpha, SplitCandidate edge,
                          const FlowMatrix& f) {
  const CircuitNode& parent = c.nodes[edge.sum_id];
  std::size_t child = static_cast<std::size_t>(parent.edges[edge.child_index].child);
  LiteralOccurrence occ = literal_occurrence(c);
  BitVector splittable = occ.splittable(child);

  std::vector<std::size_t> vars;
  splittable.for_each_set([&](std::size_t v) { vars.push_back(v); });
  if (vars.empty()) throw std::invalid_argument("edge has no splittable variable");
  if (vars.size() == 1) return vars[0];

  std::int32_t param = parent.edges[edge.child_index].param;
  const BitVector& mask = f.edge_bits[static_cast<std::size_t>(param)];
  MutualInfoMatrix mi = estimate_mi_subset(d, alpha, vars, &mask);

  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    double score = 0.0;
    for (std::size_t h = 0; h < vars.size(); ++h) {
      if (h != k) score += mi.at(h, k);
    }
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return vars[best];
}

namespace {

constexpr long kZero = -2;
constexpr long kUnvisited = -3;

/// Scratch space for building the post-split circuit: new nodes carry ids
/// past the end of the base circuit.
struct Overlay {
  const Circuit& base;
  std::vector<CircuitNode> extra;

  explicit Overlay(const Circuit& c) : base(c) {}
  long add(CircuitNode n) {
    extra.push_back(std::move(n));
    return static_cast<long>(base.nodes.size() + extra.size() - 1);
  }
  const CircuitNode& get(long id) const {
    return id < static_cast<long>(base.nodes.size())
               ? base.nodes[static_cast<std::size_t>(id)]
               : extra[static_cast<std::size_t>(id) - base.nodes.size()];
  }
};

double log_sum_exp_edges(const std::vector<std::pair<long, double>>& edges) {
  double hi = edges[0].second;
  for (const auto& e : edges) hi = std::max(hi, e.second);
  double acc = 0.0;
  for (const auto& e : edges) acc += std::exp(e.second - hi);
  return hi + std::log(acc);
}

/// Conditions a base sub-circuit on variable = keep. Nodes whose sub-circuit
/// is unchanged stay shared; restricted sums drop their dead edges and are
/// renormalized (a lone surviving literal collapses to the literal itself).
long condition(Overlay& ov, std::size_t var, bool keep, long id, std::vector<long>& memo) {
  long& slot = memo[static_cast<std::size_t>(id)];
  if (slot != kUnvisited) return slot;
  const CircuitNode& n = ov.base.nodes[static_cast<std::size_t>(id)];
  long result = id;
  switch (n.kind) {
    case NodeKind::kLiteral:
      if (static_cast<std::size_t>(n.var) == var && n.positive != keep) result = kZero;
      break;
    case NodeKind::kProduct: {
      long l = condition(ov, var, keep, n.left, memo);
      long r = condition(ov, var, keep, n.right, memo);
      if (l == kZero || r == kZero) {
        result = kZero;
      } else if (l != n.left || r != n.right) {
        CircuitNode copy;
        copy.kind = NodeKind::kProduct;
        copy.vtree_id = n.vtree_id;
        copy.left = static_cast<std::int32_t>(l);
        copy.right = static_cast<std::int32_t>(r);
        result = ov.add(std::move(copy));
      }
      break;
    }
    case NodeKind::kSum: {
      std::vector<std::pair<long, double>> kept;
      bool changed = false;
      for (const auto& e : n.edges) {
        long ce = condition(ov, var, keep, e.child, memo);
        if (ce == kZero) {
          changed = true;
          continue;
        }
        if (ce != e.child) changed = true;
        kept.emplace_back(ce, e.log_weight);
      }
      if (kept.empty()) {
        result = kZero;
      } else if (changed) {
        bool dropped = kept.size() != n.edges.size();
        if (dropped && kept.size() == 1 && ov.get(kept[0].first).kind == NodeKind::kLiteral) {
          result = kept[0].first;
        } else {
          CircuitNode copy;
          copy.kind = NodeKind::kSum;
          copy.vtree_id = n.vtree_id;
          double norm = dropped ? log_sum_exp_edges(kept) : 0.0;
          for (const auto& [child, lw] : kept)
            copy.edges.push_back({static_cast<std::int32_t>(child), lw - norm, -1});
          result = ov.add(std::move(copy));
        }
      }
      break;
    }
  }
  slot = result;
  return result;
}

/// Duplicates `levels` node levels below (and including) id, sharing
/// everything deeper. Literals are never duplicated. Deliberately uncached so
/// sub-circuits shared inside the copy region get untied parameters.
long copy_levels(Overlay& ov, long id, int levels) {
  const CircuitNode n = ov.get(id);  // copy: ov.extra may reallocate below
  if (n.kind == NodeKind::kLiteral || levels == 0) return id;
  CircuitNode copy;
  copy.kind = n.kind;
  copy.vtree_id = n.vtree_id;
  if (n.kind == NodeKind::kProduct) {
    copy.left = static_cast<std::int32_t>(copy_levels(ov, n.left, levels - 1));
    copy.right = static_cast<std::int32_t>(copy_levels(ov, n.right, levels - 1));
  } else {
    for (const auto& e : n.edges) {
      copy.edges.push_back(
          {static_cast<std::int32_t>(copy_levels(ov, e.child, levels - 1)), e.log_weight, -1});
    }
  }
  return ov.add(std::move(copy));
}

/// Emits the reachable part of the overlay graph as a fresh topologically
/// ordered circuit. `replaced` points at the sum whose edge list changed.
struct Rebuilder {
  const Overlay& ov;
  std::size_t replaced_sum;
  const std::vector<SumEdge>& new_edges;
  Circuit out;
  std::vector<long> base_map;
  std::vector<long> extra_map;

  Rebuilder(const Overlay& o, std::size_t sum_id, const std::vector<SumEdge>& edges)
      : ov(o), replaced_sum(sum_id), new_edges(edges) {
    base_map.assign(ov.base.nodes.size(), kUnvisited);
    extra_map.assign(ov.extra.size(), kUnvisited);
    out.num_vars = ov.base.num_vars;
  }

  long& slot(long id) {
    return id < static_cast<long>(ov.base.nodes.size())
               ? base_map[static_cast<std::size_t>(id)]
               : extra_map[static_cast<std::size_t>(id) - ov.base.nodes.size()];
  }

  std::int32_t emit(long id) {
    long& s = slot(id);
    if (s != kUnvisited) return static_cast<std::int32_t>(s);
    const CircuitNode& n = ov.get(id);
    CircuitNode fresh = n;
    if (n.kind == NodeKind::kProduct) {
      fresh.left = emit(n.left);
      fresh.right = emit(n.right);
    } else if (n.kind == NodeKind::kSum) {
      const std::vector<SumEdge>& edges =
          (id == static_cast<long>(replaced_sum)) ? new_edges : n.edges;
      fresh.edges.clear();
      for (const auto& e : edges) fresh.edges.push_back({emit(e.child), e.log_weight, -1});
    }
    out.nodes.push_back(std::move(fresh));
    s = static_cast<long>(out.nodes.size() - 1);
    return static_cast<std::int32_t>(s);
  }
};

}  // namespace

Circuit split(const Circuit& c, SplitCandidate edge, std::size_t variable, int depth_bound) {
  if (depth_bound < 1) throw std::invalid_argument("depth bound must be at least 1");
  if (edge.sum_id >= c.nodes.size() || c.nodes[edge.sum_id].kind != NodeKind::kSum)
    throw std::invalid_argument("split edge must start at a sum node");
  const CircuitNode& parent = c.nodes[edge.sum_id];
  if (edge.child_index >= parent.edges.size())
    throw std::invalid_argument("split edge child index out of range");
  const SumEdge& target = parent.edges[edge.child_index];
  std::size_t prod = static_cast<std::size_t>(target.child);
  if (c.nodes[prod].kind != NodeKind::kProduct)
    throw std::invalid_argument("split edge must point at a product node");

  LiteralOccurrence occ = literal_occurrence(c);
  bool pos_below = occ.pos[prod].get(variable);
  bool neg_below = occ.neg[prod].get(variable);
  if (!pos_below && !neg_below)
    throw std::invalid_argument("split variable is not in the scope of the chosen product");
  if (!(pos_below && neg_below))
    throw std::invalid_argument("split variable is already asserted below the chosen product");

  Overlay ov(c);
  std::vector<long> memo_pos(c.nodes.size(), kUnvisited);
  std::vector<long> memo_neg(c.nodes.size(), kUnvisited);
  long r1 = condition(ov, variable, true, static_cast<long>(prod), memo_pos);
  long r0 = condition(ov, variable, false, static_cast<long>(prod), memo_neg);
  if (r1 == kZero || r0 == kZero)
    throw std::logic_error("conditioning produced an empty copy");

  long c1 = copy_levels(ov, r1, depth_bound + 1);
  long c0 = copy_levels(ov, r0, depth_bound + 1);

  // The parent's probability mass for the old edge is shared evenly between
  // the copies; the refit that follows reassigns it from data.
  std::vector<SumEdge> new_edges;
  for (std::size_t e = 0; e < parent.edges.size(); ++e) {
    if (e == edge.child_index) {
      double lw = target.log_weight - std::log(2.0);
      new_edges.push_back({static_cast<std::int32_t>(c1), lw, -1});
      new_edges.push_back({static_cast<std::int32_t>(c0), lw, -1});
    } else {
      new_edges.push_back(parent.edges[e]);
    }
  }

  Rebuilder rb(ov, edge.sum_id, new_edges);
  rb.out.root = static_cast<std::size_t>(rb.emit(static_cast<long>(c.root)));
  rb.out.assign_param_indices();
  return std::move(rb.out);
}

LearnResult strudel_learn(const Dataset& train, const Dataset& valid, const SearchConfig& cfg,
                          const IterationCallback& on_iteration) {
  if (train.num_vars() != valid.num_vars())
    throw std::invalid_argument("train and validation data must share variables");
  if (cfg.depth_bound < 1) throw std::invalid_argument("depth bound must be at least 1");
  if (cfg.patience < 1) throw std::invalid_argument("patience must be at least 1");
  using clock = std::chrono::steady_clock;
  auto started = clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(clock::now() - started).count();
  };

  ChowLiuTree t = learn_clt(train, cfg.alpha);
  Vtree v = vtree_from_clt(t);
  Circuit circuit = compile_clt(t, v);

  const double train_w = train.total_weight();
  const std::vector<double>* train_weights = train.has_weights() ? &train.weights() : nullptr;

  FlowMatrix train_flows = compute_flows(circuit, train);
  auto mean_valid_ll = [&](const Circuit& cc) {
    FlowMatrix f = compute_flows(cc, valid);
    return log_likelihood(cc, f).total / static_cast<double>(valid.num_samples());
  };

  double train_ll = log_likelihood(circuit, train_flows, train_weights).total / train_w;
  double valid_ll = mean_valid_ll(circuit);

  Circuit best = circuit;
  double best_valid = valid_ll;
  int since_best = 0;

  if (on_iteration) on_iteration({0, train_ll, valid_ll, circuit.num_edges(), elapsed()});

  Rng rng(cfg.seed);
  bool use_eflow =
      cfg.heuristic == Heuristic::kEflowVmi || cfg.heuristic == Heuristic::kEflowVrand;
  bool use_vmi = cfg.heuristic == Heuristic::kEflowVmi || cfg.heuristic == Heuristic::kErandVmi;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    auto iter_started = clock::now();
    std::vector<SplitCandidate> candidates = split_candidates(circuit);
    if (candidates.empty()) break;  // search exhausted

    AggregateFlows agg = aggregate_flows(train_flows, train_weights);
    std::size_t pick;
    if (use_eflow) {
      pick = *score_edge_eflow(circuit, agg, candidates);
    } else {
      pick = score_random(candidates.size(), rng);
    }
    SplitCandidate edge = candidates[pick];

    std::size_t variable;
    if (use_vmi) {
      variable = score_var_vmi(circuit, train, cfg.alpha, edge, train_flows);
    } else {
      std::size_t child =
          static_cast<std::size_t>(circuit.nodes[edge.sum_id].edges[edge.child_index].child);
      LiteralOccurrence occ = literal_occurrence(circuit);
      std::vector<std::size_t> vars;
      occ.splittable(child).for_each_set([&](std::size_t x) { vars.push_back(x); });
      variable = vars[score_random(vars.size(), rng)];
    }

    circuit = split(circuit, edge, variable, cfg.depth_bound);
    train_flows = compute_flows(circuit, train);
    circuit = mle_parameters(circuit, aggregate_flows(train_flows, train_weights),
                             cfg.pseudocount);

    train_ll = log_likelihood(circuit, train_flows, train_weights).total / train_w;
    valid_ll = mean_valid_ll(circuit);
    if (valid_ll > best_valid) {
      best_valid = valid_ll;
      best = circuit;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (on_iteration) {
      on_iteration({static_cast<std::size_t>(iter), train_ll, valid_ll, circuit.num_edges(),
                    std::chrono::duration<double>(clock::now() - iter_started).count()});
    }
    if (since_best >= cfg.patience) break;
  }
  return {std::move(best), std::move(v)};
}

}  // namespace strudel
