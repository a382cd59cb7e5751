#pragma once

#include <cstdint>
#include <vector>

#include "strudel/circuit.hpp"
#include "strudel/dataset.hpp"

namespace strudel {

/// Packed circuit flow of a batch: one bit row per sum-edge parameter over
/// the samples, plus the root support (samples with positive probability).
struct FlowMatrix {
  std::size_t num_samples = 0;
  std::size_t num_params = 0;
  std::vector<BitVector> edge_bits;  // indexed by parameter
  BitVector root_support;

  const BitVector& edge(std::size_t param) const { return edge_bits[param]; }
};

/// Per-parameter aggregate flows a(i,j): weighted counts of samples through
/// each sum edge.
struct AggregateFlows {
  std::vector<double> counts;
};

/// Number of worker threads used by the flow up/down passes. The partitioning
/// is over fixed sample blocks, so results are bit-exact for any setting.
void set_num_threads(unsigned n);
unsigned num_threads();

/// Total compute_flows invocations so far (process-wide); lets callers verify
/// how many passes an algorithm spends.
std::uint64_t flow_pass_count();

/// Up/down bit-vector propagation over the circuit. Samples are processed in
/// fixed-size blocks; the result is independent of block size and thread
/// count. Throws if the circuit is not structurally deterministic or the
/// variable counts disagree.
FlowMatrix compute_flows(const Circuit& c, const Dataset& d, std::size_t block_bits = 4096);

struct LogLikelihood {
  std::vector<double> per_sample;  // log p(x_h)
  double total = 0.0;              // weighted sum
};

/// Per-sample LL as the flow row dotted with the log-weights; samples outside
/// the root support get -infinity.
LogLikelihood log_likelihood(const Circuit& c, const FlowMatrix& f,
                             const std::vector<double>* weights = nullptr);

AggregateFlows aggregate_flows(const FlowMatrix& f, const std::vector<double>* weights = nullptr);

/// Closed-form (smoothed) maximum-likelihood re-estimation:
/// theta_{i,j} = (a(i,j) + pseudocount) / (sum_j a(i,j) + k_i pseudocount).
/// Zero-flow nodes with zero pseudocount get uniform weights. Structure is
/// untouched; only log-weights change.
Circuit mle_parameters(const Circuit& c, const AggregateFlows& a, double pseudocount);

/// Mixture LL over a shared structure: logsumexp(F . log(Theta) + log w) per
/// sample. log_theta is num_params x k, row-major per parameter.
std::vector<double> mixture_log_likelihood(const std::vector<double>& log_theta, std::size_t k,
                                           const std::vector<double>& log_w, const FlowMatrix& f);

}  // namespace strudel
