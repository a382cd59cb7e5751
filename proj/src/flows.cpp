#include "strudel/flows.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace strudel {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
std::atomic<unsigned> g_num_threads{1};
std::atomic<std::uint64_t> g_flow_passes{0};
}  // namespace

void set_num_threads(unsigned n) { g_num_threads.store(n == 0 ? 1 : n); }
unsigned num_threads() { return g_num_threads.load(); }
std::uint64_t flow_pass_count() { return g_flow_passes.load(); }

namespace {

/// One worker's scratch: per-node support and flow words for a single block
/// of samples.
struct BlockBuffers {
  std::vector<std::uint64_t> support;
  std::vector<std::uint64_t> flow;
  explicit BlockBuffers(std::size_t num_nodes, std::size_t words)
      : support(num_nodes * words), flow(num_nodes * words) {}
};

void process_block(const Circuit& c, const Dataset& d, FlowMatrix& out, BlockBuffers& buf,
                   std::size_t block, std::size_t words_per_block) {
  const std::size_t word_begin = block * words_per_block;
  const std::size_t total_words = (d.num_samples() + 63) / 64;
  const std::size_t words = std::min(words_per_block, total_words - word_begin);
  const std::size_t tail_word = (d.num_samples() - 1) / 64;
  const std::uint64_t tail_mask =
      (d.num_samples() & 63) ? (1ull << (d.num_samples() & 63)) - 1 : ~0ull;

  auto sup = [&](std::size_t node) { return buf.support.data() + node * words_per_block; };
  auto flo = [&](std::size_t node) { return buf.flow.data() + node * words_per_block; };

  // Up pass: reached-support per node.
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    std::uint64_t* s = sup(i);
    switch (n.kind) {
      case NodeKind::kLiteral: {
        const std::uint64_t* col = d.column(static_cast<std::size_t>(n.var)).data() + word_begin;
        if (n.positive) {
          for (std::size_t w = 0; w < words; ++w) s[w] = col[w];
        } else {
          for (std::size_t w = 0; w < words; ++w) s[w] = ~col[w];
          if (word_begin + words - 1 == tail_word) s[words - 1] &= tail_mask;
        }
        break;
      }
      case NodeKind::kProduct: {
        const std::uint64_t* l = sup(static_cast<std::size_t>(n.left));
        const std::uint64_t* r = sup(static_cast<std::size_t>(n.right));
        for (std::size_t w = 0; w < words; ++w) s[w] = l[w] & r[w];
        break;
      }
      case NodeKind::kSum: {
        const std::uint64_t* c0 = sup(static_cast<std::size_t>(n.edges[0].child));
        for (std::size_t w = 0; w < words; ++w) s[w] = c0[w];
        for (std::size_t e = 1; e < n.edges.size(); ++e) {
          const std::uint64_t* ce = sup(static_cast<std::size_t>(n.edges[e].child));
          for (std::size_t w = 0; w < words; ++w) s[w] |= ce[w];
        }
        break;
      }
    }
  }

  // Down pass: parents before children (reverse topological order).
  std::fill(buf.flow.begin(), buf.flow.begin() + c.nodes.size() * words_per_block, 0ull);
  {
    std::uint64_t* fr = flo(c.root);
    const std::uint64_t* sr = sup(c.root);
    for (std::size_t w = 0; w < words; ++w) fr[w] = sr[w];
    std::uint64_t* rs = out.root_support.data() + word_begin;
    for (std::size_t w = 0; w < words; ++w) rs[w] = sr[w];
  }
  for (std::size_t ri = c.nodes.size(); ri-- > 0;) {
    const CircuitNode& n = c.nodes[ri];
    if (n.kind == NodeKind::kLiteral) continue;
    const std::uint64_t* fn = flo(ri);
    if (n.kind == NodeKind::kProduct) {
      std::uint64_t* l = flo(static_cast<std::size_t>(n.left));
      std::uint64_t* r = flo(static_cast<std::size_t>(n.right));
      for (std::size_t w = 0; w < words; ++w) {
        l[w] |= fn[w];
        r[w] |= fn[w];
      }
    } else {
      for (const auto& e : n.edges) {
        const std::uint64_t* cs = sup(static_cast<std::size_t>(e.child));
        std::uint64_t* cf = flo(static_cast<std::size_t>(e.child));
        std::uint64_t* eb = out.edge_bits[static_cast<std::size_t>(e.param)].data() + word_begin;
        for (std::size_t w = 0; w < words; ++w) {
          std::uint64_t bits = fn[w] & cs[w];
          eb[w] = bits;
          cf[w] |= bits;
        }
      }
    }
  }
}

}  // namespace

FlowMatrix compute_flows(const Circuit& c, const Dataset& d, std::size_t block_bits) {
  if (c.num_vars != d.num_vars())
    throw std::invalid_argument("circuit and dataset variable counts differ");
  if (block_bits == 0 || (block_bits & 63))
    throw std::invalid_argument("block size must be a positive multiple of 64");
  if (!is_structurally_deterministic(c))
    throw std::invalid_argument("flows require a deterministic circuit");

  g_flow_passes.fetch_add(1);

  FlowMatrix out;
  out.num_samples = d.num_samples();
  out.num_params = c.num_params;
  out.edge_bits.assign(c.num_params, BitVector(d.num_samples()));
  out.root_support = BitVector(d.num_samples());

  const std::size_t words_per_block = block_bits / 64;
  const std::size_t total_words = (d.num_samples() + 63) / 64;
  const std::size_t num_blocks = (total_words + words_per_block - 1) / words_per_block;

  unsigned workers = std::min<unsigned>(num_threads(), static_cast<unsigned>(num_blocks));
  if (workers <= 1) {
    BlockBuffers buf(c.nodes.size(), words_per_block);
    for (std::size_t b = 0; b < num_blocks; ++b) process_block(c, d, out, buf, b, words_per_block);
    return out;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    threads.emplace_back([&, t]() {
      BlockBuffers buf(c.nodes.size(), words_per_block);
      for (std::size_t b = t; b < num_blocks; b += workers)
        process_block(c, d, out, buf, b, words_per_block);
    });
  }
  for (auto& th : threads) th.join();
  return out;
}

LogLikelihood log_likelihood(const Circuit& c, const FlowMatrix& f,
                             const std::vector<double>* weights) {
  if (f.num_params != c.num_params)
    throw std::invalid_argument("flow matrix does not match circuit parameters");
  LogLikelihood out;
  out.per_sample.assign(f.num_samples, 0.0);
  for (const auto& n : c.nodes) {
    if (n.kind != NodeKind::kSum) continue;
    for (const auto& e : n.edges) {
      const double lw = e.log_weight;
      if (lw == 0.0) continue;
      f.edge_bits[static_cast<std::size_t>(e.param)].for_each_set(
          [&](std::size_t h) { out.per_sample[h] += lw; });
    }
  }
  double total = 0.0;
  for (std::size_t h = 0; h < f.num_samples; ++h) {
    if (!f.root_support.get(h)) out.per_sample[h] = kNegInf;
    double w = weights ? (*weights)[h] : 1.0;
    if (w != 0.0) total += w * out.per_sample[h];
  }
  out.total = total;
  return out;
}

AggregateFlows aggregate_flows(const FlowMatrix& f, const std::vector<double>* weights) {
  AggregateFlows a;
  a.counts.resize(f.num_params);
  for (std::size_t p = 0; p < f.num_params; ++p) {
    if (weights) {
      a.counts[p] = weighted_count(f.edge_bits[p], *weights);
    } else {
      a.counts[p] = static_cast<double>(f.edge_bits[p].count());
    }
  }
  return a;
}

namespace {

double log_sum_exp(const std::vector<double>& xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

}  // namespace

Circuit mle_parameters(const Circuit& c, const AggregateFlows& a, double pseudocount) {
  if (pseudocount < 0.0) throw std::invalid_argument("pseudocount must be non-negative");
  if (a.counts.size() != c.num_params)
    throw std::invalid_argument("aggregate flows do not match circuit parameters");
  Circuit out = c;
  std::vector<double> lws;
  for (auto& n : out.nodes) {
    if (n.kind != NodeKind::kSum) continue;
    const double k = static_cast<double>(n.edges.size());
    double denom = k * pseudocount;
    for (const auto& e : n.edges) denom += a.counts[static_cast<std::size_t>(e.param)];
    if (denom == 0.0) {
      for (auto& e : n.edges) e.log_weight = -std::log(k);
      continue;
    }
    lws.clear();
    for (const auto& e : n.edges)
      lws.push_back(std::log((a.counts[static_cast<std::size_t>(e.param)] + pseudocount) / denom));
    double norm = log_sum_exp(lws);  // absorb rounding so weights sum to one
    for (std::size_t i = 0; i < n.edges.size(); ++i) n.edges[i].log_weight = lws[i] - norm;
  }
  return out;
}

std::vector<double> mixture_log_likelihood(const std::vector<double>& log_theta, std::size_t k,
                                           const std::vector<double>& log_w, const FlowMatrix& f) {
  if (k == 0) throw std::invalid_argument("mixture needs at least one component");
  if (log_theta.size() != f.num_params * k || log_w.size() != k)
    throw std::invalid_argument("mixture parameter shapes do not match");

  std::vector<double> mat(f.num_samples * k);
  for (std::size_t h = 0; h < f.num_samples; ++h) {
    for (std::size_t i = 0; i < k; ++i) mat[h * k + i] = log_w[i];
  }
  for (std::size_t p = 0; p < f.num_params; ++p) {
    const double* row = log_theta.data() + p * k;
    f.edge_bits[p].for_each_set([&](std::size_t h) {
      double* dst = mat.data() + h * k;
      for (std::size_t i = 0; i < k; ++i) dst[i] += row[i];
    });
  }
  std::vector<double> out(f.num_samples);
  for (std::size_t h = 0; h < f.num_samples; ++h) {
    if (!f.root_support.get(h)) {
      out[h] = kNegInf;
      continue;
    }
    const double* row = mat.data() + h * k;
    double hi = kNegInf;
    for (std::size_t i = 0; i < k; ++i) hi = std::max(hi, row[i]);
    if (hi == kNegInf) {
      out[h] = kNegInf;
      continue;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += std::exp(row[i] - hi);
    out[h] = hi + std::log(acc);
  }
  return out;
}

}  // namespace strudel
