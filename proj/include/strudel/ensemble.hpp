#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strudel/circuit.hpp"
#include "strudel/dataset.hpp"
#include "strudel/flows.hpp"

namespace strudel {

/// Mixture whose components reuse one circuit structure with distinct
/// parameters. log_theta is num_params x k, row-major per parameter; each
/// column is per-sum-node normalized and log_w sums to one.
struct SharedMixture {
  Circuit structure;
  std::size_t k = 0;
  std::vector<double> log_theta;
  std::vector<double> log_w;
};

struct EmOptions {
  std::size_t components = 5;
  int max_iters = 100;
  double tol = 1e-4;  // stop when per-sample train LL improves less; negative disables
  std::uint64_t seed = 1337;
  double pseudocount = 1.0;
};

/// EM over component parameters on a fixed structure. One FlowMatrix is
/// computed for the whole fit; the E-step reuses it for every component and
/// the M-step is the closed-form weighted re-estimation. Columns start from
/// the single-model estimate with small symmetry-breaking noise.
/// `ll_trace`, when given, receives the per-sample training LL at the start
/// of every iteration.
SharedMixture em_fit(const Circuit& structure, const Dataset& d, const EmOptions& opt,
                     std::vector<double>* ll_trace = nullptr);

/// Bagged EM: one em_fit per bootstrap resample, components concatenated with
/// uniform outer weights over bags.
SharedMixture bem_fit(const Circuit& structure, const Dataset& d, std::size_t bags,
                      const EmOptions& per_bag);

/// Mean per-sample LL of the mixture on a dataset (one flow pass).
double mixture_mean_ll(const SharedMixture& mix, const Dataset& d);

/// Parameter file: `M <k> <num_params>`, a `W` line with the mixture
/// log-weights, then one `T` line of k log-parameters per parameter index.
void write_mixture_params(const SharedMixture& mix, const std::string& path);
SharedMixture read_mixture_params(Circuit structure, const std::string& path);

}  // namespace strudel
