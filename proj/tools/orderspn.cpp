#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "orderspn/causal.hpp"
#include "orderspn/circuit.hpp"
#include "orderspn/error.hpp"
#include "orderspn/exact.hpp"
#include "orderspn/infer.hpp"
#include "orderspn/io.hpp"
#include "orderspn/leaf.hpp"
#include "orderspn/order_mcmc.hpp"
#include "orderspn/pipeline.hpp"
#include "orderspn/threads.hpp"

namespace fs = std::filesystem;
using namespace orderspn;

namespace {

struct LoadedCircuit {
  OrderSpn spn;
  LocalScoreTable scores;
  LeafTable leaf;
  BgeParams params;
  std::string train_csv;
};

LoadedCircuit load_circuit(const std::string& path) {
  const auto doc = read_json(path);
  LoadedCircuit c;
  c.spn = OrderSpn::from_json(doc.at("circuit"));
  c.scores = LocalScoreTable::from_json(doc.at("scores"));
  if (c.scores.d() != c.spn.d()) throw ConfigError("circuit file: score table and circuit disagree on d");
  c.leaf = LeafTable(c.scores, 20);
  c.params = BgeParams::defaults(c.spn.d());
  if (doc.contains("bge")) {
    c.params.alpha_mu = doc["bge"].value("alpha_mu", c.params.alpha_mu);
    c.params.alpha_w = doc["bge"].value("alpha_w", c.params.alpha_w);
    c.params.t_scale = doc["bge"].value("t_scale", c.params.t_scale);
  }
  c.train_csv = doc.value("train_csv", std::string());
  if (!c.train_csv.empty() && fs::path(c.train_csv).is_relative())
    c.train_csv = (fs::path(path).parent_path() / c.train_csv).string();
  return c;
}

nlohmann::json prob_json(double log_prob) { return {{"log_prob", log_prob}, {"prob", std::exp(log_prob)}}; }

std::string fmt_estimate(const std::optional<MonteCarloEstimate>& e) {
  if (!e) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f +- %.4f", e->mean, e->std_error);
  return buf;
}

std::string fmt_value(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

void print_summary(const PipelineResult& r) {
  const auto& m = r.report;
  std::printf("%-20s %s\n", "e_shd", fmt_estimate(m.e_shd).c_str());
  std::printf("%-20s %s\n", "auroc", fmt_value(m.auroc).c_str());
  std::printf("%-20s %s\n", "mll", fmt_estimate(m.mll).c_str());
  std::printf("%-20s %s\n", "mse_ce", fmt_value(m.mse_ce).c_str());
  for (const auto& p : m.coverage) std::printf("coverage n=%-11d %.3f\n", p.n_edges, p.hit_rate);
  std::printf("%-20s %.6f -> %.6f\n", "elbo", m.elbo_initial, m.elbo_final);
  std::printf("%-20s %zu\n", "circuit edges", m.edge_count);
  for (const auto& [name, secs] : r.stage_seconds) std::printf("time %-15s %.3f s\n", name.c_str(), secs);
}

int cmd_run(const std::string& config_path, int seeds) {
  RunConfig base = RunConfig::from_json(read_json(config_path));
  if (seeds <= 1) {
    print_summary(run_pipeline(base));
    return 0;
  }
  std::vector<double> auroc, eshd, mll, msece;
  for (int s = 0; s < seeds; ++s) {
    RunConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(s);
    if (!base.output_dir.empty()) cfg.output_dir = (fs::path(base.output_dir) / ("seed_" + std::to_string(cfg.seed))).string();
    std::printf("== seed %llu\n", static_cast<unsigned long long>(cfg.seed));
    const auto r = run_pipeline(cfg);
    print_summary(r);
    if (r.report.auroc) auroc.push_back(*r.report.auroc);
    if (r.report.e_shd) eshd.push_back(r.report.e_shd->mean);
    if (r.report.mll) mll.push_back(r.report.mll->mean);
    if (r.report.mse_ce) msece.push_back(*r.report.mse_ce);
  }
  auto line = [](const char* name, const std::vector<double>& v) {
    if (v.empty()) return;
    const auto e = summarize(v);
    std::printf("%-8s mean %.4f  std %.4f  (n=%d)\n", name, e.mean, e.std_error * std::sqrt(double(e.samples)), e.samples);
  };
  std::printf("== over %d seeds\n", seeds);
  line("auroc", auroc);
  line("e_shd", eshd);
  line("mll", mll);
  line("mse_ce", msece);
  return 0;
}

// Literal lists may be given inline or as a path to a JSON file.
nlohmann::json inline_or_file(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t");
  if (first != std::string::npos && arg[first] == '[') return nlohmann::json::parse(arg);
  return read_json(arg);
}

int cmd_query(const std::string& circuit, const std::string& literals, const std::string& given_path, bool want_mpe,
              int samples, std::uint64_t seed) {
  const auto c = load_circuit(circuit);
  const int d = c.spn.d();
  EdgeConjunction given(d);
  if (!given_path.empty()) given = conjunction_from_json(inline_or_file(given_path), d);
  nlohmann::json out;
  if (!literals.empty()) {
    const auto q = conjunction_from_json(inline_or_file(literals), d);
    out = prob_json(given_path.empty() ? marginal(c.spn, c.leaf, q) : conditional(c.spn, c.leaf, q, given));
  }
  if (want_mpe) {
    const auto m = mpe(c.spn, c.leaf, given);
    out["mpe"] = {{"log_prob", m.log_prob}, {"order", m.order.perm()}, {"dag", dag_to_json(m.dag)}};
  }
  if (samples > 0) {
    const auto draws = sample_many(c.spn, c.leaf, samples, seed, given_path.empty() ? nullptr : &given);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : draws) arr.push_back({{"order", s.order.perm()}, {"dag", dag_to_json(s.dag)}});
    out["samples"] = arr;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_bce(const std::string& circuit, const std::string& out_path, int samples) {
  const auto c = load_circuit(circuit);
  if (c.train_csv.empty()) throw ConfigError("bce: circuit file has no training data path");
  const Dataset train = read_csv_dataset(c.train_csv);
  BgeWeightOptions opt;
  opt.sample_count = samples;
  const BgePosteriorWeightModel model(train, c.params, c.scores.candidate_sets(), opt);
  const Eigen::MatrixXd bce = bce_matrix(c.spn, c.leaf, model);
  if (out_path.empty()) {
    for (Eigen::Index i = 0; i < bce.rows(); ++i)
      for (Eigen::Index j = 0; j < bce.cols(); ++j) std::printf(j + 1 < bce.cols() ? "%.17g," : "%.17g\n", bce(i, j));
  } else {
    write_matrix_csv(out_path, bce);
  }
  return 0;
}

int cmd_exact(int d, int n, std::uint64_t seed, const std::string& circuit, const std::string& literals) {
  LocalScoreTable scores;
  std::optional<LoadedCircuit> loaded;
  if (!circuit.empty()) {
    loaded = load_circuit(circuit);
    scores = loaded->scores;
  } else {
    if (d < 1 || d > kExactMaxVariables) throw ConfigError("exact: d must lie in [1, 5]");
    const Dag truth = sample_erdos_renyi_dag(d, 2.0 * d, derive_seed(seed, 0));
    const auto [bn, data] = sample_weights_and_data(truth, n, 1.0, 0.1, derive_seed(seed, 1));
    scores = build_score_table(data, full_candidates(d), BgeParams::defaults(d));
  }
  const auto post = enumerate_posterior(scores, scores.d());
  nlohmann::json out;
  out["d"] = scores.d();
  out["log_z"] = post.log_z();
  out["log_z_by_graph"] = log_z_by_graph(scores);
  out["pairs"] = post.entries().size();
  const Eigen::MatrixXd em = exact_edge_marginals(post);
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < em.rows(); ++i) {
    std::vector<double> row(em.cols());
    for (int j = 0; j < em.cols(); ++j) row[j] = em(i, j);
    rows.push_back(row);
  }
  out["edge_marginals"] = rows;
  const auto m = exact_mpe(post, EdgeConjunction(scores.d()));
  out["mpe"] = {{"log_prob", m.log_prob}, {"order", m.order.perm()}, {"dag", dag_to_json(m.dag)}};
  if (!literals.empty()) {
    const auto q = conjunction_from_json(inline_or_file(literals), scores.d());
    out["query"] = prob_json(exact_marginal(post, q));
    if (loaded) out["circuit_query"] = prob_json(marginal(loaded->spn, loaded->leaf, q));
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

// {"d": 8, "n": 100, "seed": 0, "repeats": 3, "expansion_factors": [[2,2,2], [4,4,2]]}
int cmd_bench(const std::string& sweep_path) {
  const auto sweep = read_json(sweep_path);
  const int d = sweep.value("d", 8);
  const int n = sweep.value("n", 100);
  const std::uint64_t seed = sweep.value("seed", std::uint64_t{0});
  const int repeats = sweep.value("repeats", 3);
  const Dag truth = sample_erdos_renyi_dag(d, 2.0 * d, derive_seed(seed, 0));
  const auto [bn, data] = sample_weights_and_data(truth, n, 1.0, 0.1, derive_seed(seed, 1));
  const BgeParams params = BgeParams::defaults(d);
  const auto scores = build_score_table(data, select_candidates(data, std::min(d - 1, 8), params), params);
  const LeafTable leaf(scores);
  const OrderMcmcOracle oracle(leaf, sweep.value("oracle_budget", 2000));
  std::printf("%-24s %10s %14s %12s %12s\n", "K", "edges", "edge_visits", "marginal_ms", "elbo_ms");
  for (const auto& k : sweep.at("expansion_factors")) {
    BuildOptions opt;
    opt.expansion_factors = k.get<std::vector<int>>();
    opt.seed = seed;
    opt.on_warning = [](const std::string&) {};
    const OrderSpn spn = build_regular(leaf, oracle, opt);
    PassCounters counters;
    EdgeConjunction c(d);
    double marginal_ms = 0.0;
    double elbo_ms = 0.0;
    const ElboState state = ElboState::init(spn, leaf);
    for (int r = 0; r < repeats; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      marginal(spn, leaf, c, r == 0 ? &counters : nullptr);
      auto t1 = std::chrono::steady_clock::now();
      elbo_and_gradient(spn, state);
      auto t2 = std::chrono::steady_clock::now();
      marginal_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
      elbo_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
    }
    std::printf("%-24s %10zu %14llu %12.3f %12.3f\n", k.dump().c_str(), spn.edge_count(),
                static_cast<unsigned long long>(counters.edge_visits), marginal_ms / repeats, elbo_ms / repeats);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();
  CLI::App app{"OrderSPN posteriors over Bayesian network structures"};
  app.require_subcommand(1);

  std::string config_path;
  int seeds = 1;
  auto* run = app.add_subcommand("run", "generate data, build and fit a circuit, report metrics");
  run->add_option("--config", config_path, "run configuration (JSON)")->required();
  run->add_option("--seeds", seeds, "run this many consecutive seeds and report mean and std");

  std::string circuit, literals, given;
  bool want_mpe = false;
  int samples = 0;
  std::uint64_t seed = 0;
  auto* query = app.add_subcommand("query", "marginal / conditional / MPE / samples from a circuit file");
  query->add_option("--circuit", circuit, "circuit.json written by 'run'")->required();
  query->add_option("--literals", literals, "edge literals: inline JSON list or file");
  query->add_option("--given", given, "conditioning literals: inline JSON list or file");
  query->add_flag("--mpe", want_mpe, "most probable (order, graph) given the conditioning literals");
  query->add_option("--samples", samples, "number of (order, graph) samples to emit");
  query->add_option("--seed", seed, "sampling seed");

  std::string bce_out;
  int bce_samples = 64;
  auto* bce = app.add_subcommand("bce", "expected causal effect matrix (row = cause, column = effect)");
  bce->add_option("--circuit", circuit, "circuit.json written by 'run'")->required();
  bce->add_option("--out", bce_out, "CSV output path (default stdout)");
  bce->add_option("--samples", bce_samples, "parent-set samples per leaf when enumeration is too large");

  int exact_d = 4;
  int exact_n = 100;
  auto* exact = app.add_subcommand("exact", "brute-force posterior for d <= 5");
  exact->add_option("--d", exact_d, "number of variables for generated data");
  exact->add_option("--n", exact_n, "rows of generated data");
  exact->add_option("--seed", seed, "data seed");
  exact->add_option("--circuit", circuit, "use the score table of this circuit file instead of generated data");
  exact->add_option("--literals", literals, "edge literals to evaluate: inline JSON list or file");

  std::string sweep;
  auto* bench = app.add_subcommand("bench", "pass timings and edge-visit counts across expansion factors");
  bench->add_option("--sweep", sweep, "sweep description (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, seeds);
    if (query->parsed()) return cmd_query(circuit, literals, given, want_mpe, samples, seed);
    if (bce->parsed()) return cmd_bce(circuit, bce_out, bce_samples);
    if (exact->parsed()) return cmd_exact(exact_d, exact_n, seed, circuit, literals);
    if (bench->parsed()) return cmd_bench(sweep);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible query: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
