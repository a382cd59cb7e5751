// strudel: learn and evaluate structured-decomposable probabilistic circuits
// on binary datasets.
//
// Subcommands: learn, eval, em, bem, bench-flows, validate.
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "strudel/circuit.hpp"
#include "strudel/dataset.hpp"
#include "strudel/ensemble.hpp"
#include "strudel/flows.hpp"
#include "strudel/search.hpp"
#include "strudel/vtree.hpp"

namespace {

using namespace strudel;

double bits_per_dimension(double total_ll, std::size_t num_samples, std::size_t num_vars) {
  return -total_ll /
         (std::log(2.0) * static_cast<double>(num_samples) * static_cast<double>(num_vars));
}

void print_metrics(double total_ll, std::size_t num_samples, std::size_t num_vars) {
  std::printf("samples      %zu\n", num_samples);
  std::printf("mean_ll      %.6f\n", total_ll / static_cast<double>(num_samples));
  std::printf("total_ll     %.6f\n", total_ll);
  std::printf("bpd          %.6f\n", bits_per_dimension(total_ll, num_samples, num_vars));
}

struct LearnFlags {
  std::string train, valid, out;
  std::string heuristic = "eflow-vmi";
  double alpha = 1.0;
  double pseudocount = 1.0;
  int depth_bound = 1;
  int patience = 100;
  int max_iters = 10000;
  std::uint64_t seed = 1337;
  unsigned threads = 1;
};

int cmd_learn(const LearnFlags& flags) {
  auto heuristic = heuristic_from_name(flags.heuristic);
  if (!heuristic) {
    std::cerr << "unknown heuristic: " << flags.heuristic << "\n";
    return 2;
  }
  set_num_threads(flags.threads);
  Dataset train = load_dataset(flags.train);
  Dataset valid = load_dataset(flags.valid);

  SearchConfig cfg;
  cfg.heuristic = *heuristic;
  cfg.alpha = flags.alpha;
  cfg.pseudocount = flags.pseudocount;
  cfg.depth_bound = flags.depth_bound;
  cfg.patience = flags.patience;
  cfg.max_iters = flags.max_iters;
  cfg.seed = flags.seed;

  std::ofstream log(flags.out + ".log.csv");
  if (!log) throw std::runtime_error("cannot write log file: " + flags.out + ".log.csv");
  log << "iteration,train_ll,valid_ll,edges,seconds\n";
  char buf[160];
  LearnResult result = strudel_learn(train, valid, cfg, [&](const IterationStats& s) {
    std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f,%zu,%.4f", s.iteration, s.train_ll,
                  s.valid_ll, s.num_edges, s.seconds);
    log << buf << '\n';
  });

  write_circuit(result.circuit, flags.out + ".psc");
  write_vtree(result.vtree, flags.out + ".vtree");
  std::printf("circuit      %s.psc\n", flags.out.c_str());
  std::printf("vtree        %s.vtree\n", flags.out.c_str());
  std::printf("edges        %zu\n", result.circuit.num_edges());
  std::printf("parameters   %zu\n", result.circuit.num_params);
  return 0;
}

int cmd_eval(const std::string& circuit_path, const std::string& data_path,
             const std::string& mixture_path, unsigned threads) {
  set_num_threads(threads);
  Circuit c = read_circuit(circuit_path);
  Dataset d = load_dataset(data_path);
  if (c.num_vars != d.num_vars())
    throw std::runtime_error("circuit has " + std::to_string(c.num_vars) +
                             " variables but dataset has " + std::to_string(d.num_vars()));
  if (mixture_path.empty()) {
    FlowMatrix f = compute_flows(c, d);
    LogLikelihood ll = log_likelihood(c, f);
    print_metrics(ll.total, d.num_samples(), d.num_vars());
  } else {
    SharedMixture mix = read_mixture_params(std::move(c), mixture_path);
    FlowMatrix f = compute_flows(mix.structure, d);
    std::vector<double> ll = mixture_log_likelihood(mix.log_theta, mix.k, mix.log_w, f);
    double total = 0.0;
    for (double x : ll) total += x;
    print_metrics(total, d.num_samples(), d.num_vars());
  }
  return 0;
}

struct EmFlags {
  std::string circuit, train, valid, out;
  std::size_t components = 5;
  std::size_t bags = 0;  // 0 = plain EM
  bool grid = false;
  int iters = 100;
  double tol = 1e-4;
  double pseudocount = 1.0;
  std::uint64_t seed = 1337;
  unsigned threads = 1;
};

int cmd_em(const EmFlags& flags) {
  set_num_threads(flags.threads);
  Circuit c = read_circuit(flags.circuit);
  Dataset train = load_dataset(flags.train);

  EmOptions opt;
  opt.max_iters = flags.iters;
  opt.tol = flags.tol;
  opt.pseudocount = flags.pseudocount;
  opt.seed = flags.seed;

  SharedMixture best;
  if (flags.grid) {
    if (flags.valid.empty())
      throw std::runtime_error("--grid needs --valid for model selection");
    Dataset valid = load_dataset(flags.valid);
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t k : {2, 5, 10, 15, 20, 25, 30}) {
      opt.components = k;
      SharedMixture mix =
          flags.bags > 0 ? bem_fit(c, train, flags.bags, opt) : em_fit(c, train, opt);
      double valid_ll = mixture_mean_ll(mix, valid);
      std::printf("grid k=%-3zu valid mean_ll %.6f\n", k, valid_ll);
      if (valid_ll > best_ll) {
        best_ll = valid_ll;
        best = std::move(mix);
      }
    }
    std::printf("selected k   %zu\n", best.k);
  } else {
    opt.components = flags.components;
    best = flags.bags > 0 ? bem_fit(c, train, flags.bags, opt) : em_fit(c, train, opt);
  }

  write_mixture_params(best, flags.out + ".mix");
  std::printf("mixture      %s.mix\n", flags.out.c_str());
  std::printf("components   %zu\n", best.k);
  std::printf("train mean_ll %.6f\n", mixture_mean_ll(best, train));
  return 0;
}

/// Classical baseline: per component, a bottom-up log-space evaluation of
/// every sample (no flow reuse).
double classical_mixture_total_ll(const Circuit& c, const std::vector<double>& log_theta,
                                  std::size_t k, const std::vector<double>& log_w,
                                  const Dataset& d) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> value(c.nodes.size());
  std::vector<double> per_sample(d.num_samples() * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t s = 0; s < d.num_samples(); ++s) {
      for (std::size_t n = 0; n < c.nodes.size(); ++n) {
        const CircuitNode& node = c.nodes[n];
        switch (node.kind) {
          case NodeKind::kLiteral:
            value[n] =
                d.value(s, static_cast<std::size_t>(node.var)) == node.positive ? 0.0 : neg_inf;
            break;
          case NodeKind::kProduct:
            value[n] = value[static_cast<std::size_t>(node.left)] +
                       value[static_cast<std::size_t>(node.right)];
            break;
          case NodeKind::kSum: {
            double acc = neg_inf;
            for (const auto& e : node.edges) {
              double term = log_theta[static_cast<std::size_t>(e.param) * k + i] +
                            value[static_cast<std::size_t>(e.child)];
              if (term == neg_inf) continue;
              if (acc == neg_inf) {
                acc = term;
              } else if (term > acc) {
                acc = term + std::log1p(std::exp(acc - term));
              } else {
                acc = acc + std::log1p(std::exp(term - acc));
              }
            }
            value[n] = acc;
            break;
          }
        }
      }
      per_sample[s * k + i] = value[c.root];
    }
  }
  double total = 0.0;
  for (std::size_t s = 0; s < d.num_samples(); ++s) {
    double hi = neg_inf;
    for (std::size_t i = 0; i < k; ++i) hi = std::max(hi, log_w[i] + per_sample[s * k + i]);
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += std::exp(log_w[i] + per_sample[s * k + i] - hi);
    total += hi + std::log(acc);
  }
  return total;
}

int cmd_bench_flows(const std::string& circuit_path, const std::string& data_path,
                    const std::string& out_path, unsigned threads) {
  set_num_threads(threads);
  Circuit c = read_circuit(circuit_path);
  Dataset d = load_dataset(data_path);
  if (c.num_vars != d.num_vars()) throw std::runtime_error("variable count mismatch");

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot write csv: " + out_path);
    out = &file;
  }
  (*out) << "k,flow_seconds,classical_seconds,speedup\n";

  Rng rng(7);
  using clock = std::chrono::steady_clock;
  for (std::size_t k : {1, 2, 5, 10, 20, 50, 100}) {
    // k parameterizations: the circuit's own weights, jittered per component
    std::vector<double> log_theta(c.num_params * k);
    std::vector<double> log_w(k, -std::log(static_cast<double>(k)));
    for (std::size_t i = 0; i < k; ++i) {
      for (const auto& n : c.nodes) {
        if (n.kind != NodeKind::kSum) continue;
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& e : n.edges) {
          std::size_t p = static_cast<std::size_t>(e.param);
          log_theta[p * k + i] = e.log_weight + (i == 0 ? 0.0 : rng.uniform(-0.05, 0.05));
          hi = std::max(hi, log_theta[p * k + i]);
        }
        double acc = 0.0;
        for (const auto& e : n.edges)
          acc += std::exp(log_theta[static_cast<std::size_t>(e.param) * k + i] - hi);
        double norm = hi + std::log(acc);
        for (const auto& e : n.edges) log_theta[static_cast<std::size_t>(e.param) * k + i] -= norm;
      }
    }

    auto t0 = clock::now();
    FlowMatrix f = compute_flows(c, d);
    std::vector<double> flow_ll = mixture_log_likelihood(log_theta, k, log_w, f);
    double flow_total = 0.0;
    for (double x : flow_ll) flow_total += x;
    auto t1 = clock::now();
    double classical_total = classical_mixture_total_ll(c, log_theta, k, log_w, d);
    auto t2 = clock::now();

    if (std::abs(flow_total - classical_total) > 1e-6 * (1.0 + std::abs(flow_total)))
      throw std::runtime_error("flow and classical likelihoods disagree");

    double flow_s = std::chrono::duration<double>(t1 - t0).count();
    double classical_s = std::chrono::duration<double>(t2 - t1).count();
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.3f", k, flow_s, classical_s,
                  classical_s / flow_s);
    (*out) << buf << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& circuit_path, const std::string& vtree_path) {
  Vtree v = read_vtree(vtree_path);
  if (auto violation = validate_vtree(v)) {
    std::printf("vtree        INVALID (node %zu: %s)\n", violation->node,
                violation->reason.c_str());
    return 1;
  }
  std::printf("vtree        ok (%zu nodes)\n", v.num_nodes());

  Circuit c = read_circuit(circuit_path);
  StructureReport r = check_structure(c, v);
  std::printf("smooth       %s\n", r.smooth ? "yes" : "NO");
  std::printf("decomposable %s\n", r.decomposable ? "yes" : "NO");
  std::printf("deterministic %s\n", r.deterministic ? "yes" : "NO");
  std::printf("structured   %s\n", r.structured ? "yes" : "NO");
  if (!r.all()) {
    if (r.first_violation) {
      std::printf("violation    node %zu: %s\n", r.first_violation->node,
                  r.first_violation->reason.c_str());
    }
    return 1;
  }
  std::printf("nodes        %zu\n", c.nodes.size());
  std::printf("edges        %zu\n", c.num_edges());
  std::printf("parameters   %zu\n", c.num_params);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured-decomposable probabilistic circuit learner"};
  app.require_subcommand(1);

  LearnFlags learn;
  CLI::App* learn_cmd = app.add_subcommand("learn", "learn a circuit from data");
  learn_cmd->add_option("--train", learn.train, "training data file")->required();
  learn_cmd->add_option("--valid", learn.valid, "validation data file")->required();
  learn_cmd->add_option("--out", learn.out, "output prefix")->required();
  learn_cmd->add_option("--heuristic", learn.heuristic,
                        "eflow-vmi | eflow-vrand | erand-vmi | erand-vrand");
  learn_cmd->add_option("--alpha", learn.alpha, "Laplace smoothing for MI/CPT estimates");
  learn_cmd->add_option("--pseudocount", learn.pseudocount, "refit smoothing");
  learn_cmd->add_option("--depth-bound", learn.depth_bound, "split copy depth");
  learn_cmd->add_option("--patience", learn.patience, "early-stop window");
  learn_cmd->add_option("--max-iters", learn.max_iters, "iteration cap");
  learn_cmd->add_option("--seed", learn.seed, "random seed");
  learn_cmd->add_option("--threads", learn.threads, "worker threads");

  std::string eval_circuit, eval_data, eval_mixture;
  unsigned eval_threads = 1;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a circuit or mixture");
  eval_cmd->add_option("--circuit", eval_circuit, "circuit file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset file")->required();
  eval_cmd->add_option("--mixture", eval_mixture, "mixture parameter file");
  eval_cmd->add_option("--threads", eval_threads, "worker threads");

  EmFlags em;
  CLI::App* em_cmd = app.add_subcommand("em", "fit a shared-structure mixture with EM");
  em_cmd->add_option("--circuit", em.circuit, "shared structure circuit file")->required();
  em_cmd->add_option("--train", em.train, "training data file")->required();
  em_cmd->add_option("--valid", em.valid, "validation data (for --grid)");
  em_cmd->add_option("--out", em.out, "output prefix")->required();
  em_cmd->add_option("--components", em.components, "mixture components");
  em_cmd->add_flag("--grid", em.grid, "select k on validation data");
  em_cmd->add_option("--iters", em.iters, "EM iterations");
  em_cmd->add_option("--tol", em.tol, "stop tolerance (per-sample LL)");
  em_cmd->add_option("--pseudocount", em.pseudocount, "M-step smoothing");
  em_cmd->add_option("--seed", em.seed, "random seed");
  em_cmd->add_option("--threads", em.threads, "worker threads");

  EmFlags bem = em;
  bem.bags = 10;
  CLI::App* bem_cmd = app.add_subcommand("bem", "bagged EM mixtures");
  bem_cmd->add_option("--circuit", bem.circuit, "shared structure circuit file")->required();
  bem_cmd->add_option("--train", bem.train, "training data file")->required();
  bem_cmd->add_option("--valid", bem.valid, "validation data (for --grid)");
  bem_cmd->add_option("--out", bem.out, "output prefix")->required();
  bem_cmd->add_option("--bags", bem.bags, "bootstrap bags");
  bem_cmd->add_option("--components", bem.components, "components per bag");
  bem_cmd->add_flag("--grid", bem.grid, "select per-bag k on validation data");
  bem_cmd->add_option("--iters", bem.iters, "EM iterations");
  bem_cmd->add_option("--tol", bem.tol, "stop tolerance (per-sample LL)");
  bem_cmd->add_option("--pseudocount", bem.pseudocount, "M-step smoothing");
  bem_cmd->add_option("--seed", bem.seed, "random seed");
  bem_cmd->add_option("--threads", bem.threads, "worker threads");

  std::string bench_circuit, bench_data, bench_out;
  unsigned bench_threads = 1;
  CLI::App* bench_cmd =
      app.add_subcommand("bench-flows", "time flow vs classical mixture evaluation");
  bench_cmd->add_option("--circuit", bench_circuit, "circuit file")->required();
  bench_cmd->add_option("--data", bench_data, "dataset file")->required();
  bench_cmd->add_option("--out", bench_out, "csv output path (default stdout)");
  bench_cmd->add_option("--threads", bench_threads, "worker threads");

  std::string val_circuit, val_vtree;
  CLI::App* val_cmd = app.add_subcommand("validate", "check circuit and vtree files");
  val_cmd->add_option("--circuit", val_circuit, "circuit file")->required();
  val_cmd->add_option("--vtree", val_vtree, "vtree file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (learn_cmd->parsed()) return cmd_learn(learn);
    if (eval_cmd->parsed()) return cmd_eval(eval_circuit, eval_data, eval_mixture, eval_threads);
    if (em_cmd->parsed()) {
      em.bags = 0;
      return cmd_em(em);
    }
    if (bem_cmd->parsed()) return cmd_em(bem);
    if (bench_cmd->parsed())
      return cmd_bench_flows(bench_circuit, bench_data, bench_out, bench_threads);
    if (val_cmd->parsed()) return cmd_validate(val_circuit, val_vtree);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
