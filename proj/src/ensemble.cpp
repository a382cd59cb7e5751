#include "strudel/ensemble.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "strudel/rng.hpp"

namespace strudel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kWeightFloor = 1e-12;

/// Normalizes every sum node's slice of one parameter column in place.
void normalize_column(const Circuit& c, std::vector<double>& log_theta, std::size_t k,
                      std::size_t col) {
  for (const auto& n : c.nodes) {
    if (n.kind != NodeKind::kSum) continue;
    double hi = kNegInf;
    for (const auto& e : n.edges)
      hi = std::max(hi, log_theta[static_cast<std::size_t>(e.param) * k + col]);
    double acc = 0.0;
    for (const auto& e : n.edges)
      acc += std::exp(log_theta[static_cast<std::size_t>(e.param) * k + col] - hi);
    double norm = hi + std::log(acc);
    for (const auto& e : n.edges)
      log_theta[static_cast<std::size_t>(e.param) * k + col] -= norm;
  }
}

/// Closed-form M-step for one column from weighted aggregate flows.
void column_from_counts(const Circuit& c, const std::vector<double>& counts, double pseudocount,
                        std::vector<double>& log_theta, std::size_t k, std::size_t col) {
  for (const auto& n : c.nodes) {
    if (n.kind != NodeKind::kSum) continue;
    const double arity = static_cast<double>(n.edges.size());
    double denom = arity * pseudocount;
    for (const auto& e : n.edges) denom += counts[static_cast<std::size_t>(e.param)];
    for (const auto& e : n.edges) {
      std::size_t p = static_cast<std::size_t>(e.param);
      log_theta[p * k + col] =
          denom == 0.0 ? -std::log(arity) : std::log((counts[p] + pseudocount) / denom);
    }
  }
  normalize_column(c, log_theta, k, col);
}

}  // namespace

SharedMixture em_fit(const Circuit& structure, const Dataset& d, const EmOptions& opt,
                     std::vector<double>* ll_trace) {
  if (opt.components == 0) throw std::invalid_argument("mixture needs at least one component");
  const std::size_t k = opt.components;
  const std::size_t n = d.num_samples();
  const std::size_t np = structure.num_params;
  const double total_w = d.total_weight();

  // The one flow pass of the whole fit.
  FlowMatrix flows = compute_flows(structure, d);

  // Single-model smoothed MLE as the starting point for every column.
  AggregateFlows agg = aggregate_flows(flows, d.has_weights() ? &d.weights() : nullptr);
  std::vector<double> base(np);
  {
    Circuit fitted = mle_parameters(structure, agg, opt.pseudocount);
    for (const auto& node : fitted.nodes) {
      if (node.kind != NodeKind::kSum) continue;
      for (const auto& e : node.edges)
        base[static_cast<std::size_t>(e.param)] = e.log_weight;
    }
  }

  SharedMixture mix;
  mix.structure = structure;
  mix.k = k;
  mix.log_theta.assign(np * k, 0.0);
  mix.log_w.assign(k, -std::log(static_cast<double>(k)));

  Rng rng(opt.seed);
  for (std::size_t col = 0; col < k; ++col) {
    for (std::size_t p = 0; p < np; ++p) {
      double noise = k == 1 ? 0.0 : rng.uniform(-0.1, 0.1);
      mix.log_theta[p * k + col] = base[p] + noise;
    }
    normalize_column(mix.structure, mix.log_theta, k, col);
  }

  std::vector<double> joint(n * k);
  std::vector<double> resp(n * k);
  std::vector<double> counts(np);
  double prev_ll = kNegInf;

  for (int iter = 0; iter < opt.max_iters; ++iter) {
    // E step: per-sample per-component joints from the shared flow.
    for (std::size_t h = 0; h < n; ++h) {
      for (std::size_t i = 0; i < k; ++i) joint[h * k + i] = mix.log_w[i];
    }
    for (std::size_t p = 0; p < np; ++p) {
      const double* row = mix.log_theta.data() + p * k;
      flows.edge_bits[p].for_each_set([&](std::size_t h) {
        double* dst = joint.data() + h * k;
        for (std::size_t i = 0; i < k; ++i) dst[i] += row[i];
      });
    }
    double train_ll = 0.0;
    for (std::size_t h = 0; h < n; ++h) {
      double* row = joint.data() + h * k;
      double hi = kNegInf;
      for (std::size_t i = 0; i < k; ++i) hi = std::max(hi, row[i]);
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += std::exp(row[i] - hi);
      double ll = hi + std::log(acc);
      if (!flows.root_support.get(h)) ll = kNegInf;
      double wh = d.weight(h);
      if (wh != 0.0) train_ll += wh * ll;
      for (std::size_t i = 0; i < k; ++i)
        resp[h * k + i] = ll == kNegInf ? 0.0 : wh * std::exp(row[i] - ll);
    }
    if (ll_trace) ll_trace->push_back(train_ll);

    // M step: weighted closed-form refit per component.
    std::vector<double> new_w(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      std::fill(counts.begin(), counts.end(), 0.0);
      for (std::size_t p = 0; p < np; ++p) {
        double acc = 0.0;
        flows.edge_bits[p].for_each_set([&](std::size_t h) { acc += resp[h * k + i]; });
        counts[p] = acc;
      }
      column_from_counts(mix.structure, counts, opt.pseudocount, mix.log_theta, k, i);
      for (std::size_t h = 0; h < n; ++h) new_w[i] += resp[h * k + i];
    }
    bool floored = false;
    double wsum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      new_w[i] /= total_w;
      if (new_w[i] < kWeightFloor) {
        new_w[i] = kWeightFloor;
        floored = true;
      }
      wsum += new_w[i];
    }
    if (floored)
      std::cerr << "warning: mixture component collapsed; weight floored at " << kWeightFloor
                << "\n";
    for (std::size_t i = 0; i < k; ++i) mix.log_w[i] = std::log(new_w[i] / wsum);

    if (opt.tol >= 0.0 && iter > 0 && (train_ll - prev_ll) / total_w < opt.tol) break;
    prev_ll = train_ll;
  }
  return mix;
}

SharedMixture bem_fit(const Circuit& structure, const Dataset& d, std::size_t bags,
                      const EmOptions& per_bag) {
  if (bags == 0) throw std::invalid_argument("bagging needs at least one bag");
  SharedMixture out;
  out.structure = structure;
  out.k = bags * per_bag.components;
  out.log_theta.assign(structure.num_params * out.k, 0.0);
  out.log_w.assign(out.k, 0.0);
  const double log_bag_w = -std::log(static_cast<double>(bags));

  for (std::size_t b = 0; b < bags; ++b) {
    std::uint64_t bag_seed = per_bag.seed + 1000003ull * b;
    Dataset bag = bag_resample(d, bag_seed);
    EmOptions opt = per_bag;
    opt.seed = bag_seed + 1;
    SharedMixture m = em_fit(structure, bag, opt);
    for (std::size_t i = 0; i < per_bag.components; ++i) {
      std::size_t col = b * per_bag.components + i;
      out.log_w[col] = log_bag_w + m.log_w[i];
      for (std::size_t p = 0; p < structure.num_params; ++p)
        out.log_theta[p * out.k + col] = m.log_theta[p * m.k + i];
    }
  }
  return out;
}

double mixture_mean_ll(const SharedMixture& mix, const Dataset& d) {
  FlowMatrix flows = compute_flows(mix.structure, d);
  std::vector<double> ll = mixture_log_likelihood(mix.log_theta, mix.k, mix.log_w, flows);
  double acc = 0.0;
  for (std::size_t h = 0; h < d.num_samples(); ++h) acc += d.weight(h) * ll[h];
  return acc / d.total_weight();
}

void write_mixture_params(const SharedMixture& mix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mixture file: " + path);
  char buf[64];
  auto fmt = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  out << "c mixture parameters over a shared circuit\n";
  out << "M " << mix.k << ' ' << mix.structure.num_params << '\n';
  out << "W";
  for (double w : mix.log_w) out << ' ' << fmt(w);
  out << '\n';
  for (std::size_t p = 0; p < mix.structure.num_params; ++p) {
    out << "T";
    for (std::size_t i = 0; i < mix.k; ++i) out << ' ' << fmt(mix.log_theta[p * mix.k + i]);
    out << '\n';
  }
}

SharedMixture read_mixture_params(Circuit structure, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mixture file: " + path);
  SharedMixture mix;
  mix.structure = std::move(structure);
  std::string line;
  std::size_t line_no = 0;
  std::size_t next_param = 0;
  bool have_header = false;
  auto fail = [&](const std::string& msg) {
    throw ParseError("mixture line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == 'c') continue;
    std::istringstream ss(line);
    char tag;
    ss >> tag;
    if (tag == 'M') {
      std::size_t np;
      if (!(ss >> mix.k >> np) || mix.k == 0) fail("malformed header");
      if (np != mix.structure.num_params) fail("parameter count does not match the circuit");
      mix.log_theta.assign(np * mix.k, 0.0);
      have_header = true;
    } else if (tag == 'W') {
      if (!have_header) fail("W line before M header");
      mix.log_w.assign(mix.k, 0.0);
      for (std::size_t i = 0; i < mix.k; ++i) {
        if (!(ss >> mix.log_w[i])) fail("malformed weight line");
      }
    } else if (tag == 'T') {
      if (!have_header) fail("T line before M header");
      if (next_param >= mix.structure.num_params) fail("too many parameter lines");
      for (std::size_t i = 0; i < mix.k; ++i) {
        if (!(ss >> mix.log_theta[next_param * mix.k + i])) fail("malformed parameter line");
      }
      ++next_param;
    } else {
      fail(std::string("unknown tag '") + tag + "'");
    }
  }
  if (!have_header) throw ParseError("mixture file missing M header: " + path);
  if (next_param != mix.structure.num_params)
    throw ParseError("mixture file has too few parameter lines: " + path);
  if (mix.log_w.empty()) throw ParseError("mixture file missing W line: " + path);
  return mix;
}

}  // namespace strudel
