#include "orderspn/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "orderspn/causal.hpp"
#include "orderspn/error.hpp"
#include "orderspn/infer.hpp"
#include "orderspn/io.hpp"
#include "orderspn/leaf.hpp"
#include "orderspn/order_mcmc.hpp"
#include "orderspn/threads.hpp"

namespace orderspn {

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

// Re-throws with the stage name prefixed, keeping the error category.
template <typename F>
auto stage(const char* name, std::vector<std::pair<std::string, double>>& timings, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    timings.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  };
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto out = body();
      finish();
      return out;
    }
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(name) + ": " + e.what());
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(std::string(name) + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  }
}

nlohmann::json estimate_json(const MonteCarloEstimate& e) {
  return {{"mean", e.mean}, {"std_error", e.std_error}, {"samples", e.samples}};
}

}  // namespace

std::vector<int> default_expansion_factors(int d) {
  const int layers = regular_layer_count(d);
  const std::vector<int> base = {64, 16, 6, 2};
  std::vector<int> out;
  for (int j = 0; j < layers; ++j) {
    const int from_end = layers - 1 - j;
    out.push_back(from_end < static_cast<int>(base.size()) ? base[base.size() - 1 - from_end] : 64);
  }
  // Largest block at layer j has ceil(d / 2^j) variables.
  int block = d;
  for (int j = 0; j < layers; ++j) {
    const double available = std::round(std::exp(log_binomial(block, block / 2)));
    if (available < out[j]) out[j] = static_cast<int>(available);
    block = block - block / 2;
  }
  return out;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "d", "n_train", "n_test", "expected_edges", "seed", "candidate_k", "expansion_factors",
      "exhaustive_threshold", "oracle", "oracle_budget", "weight_std", "noise_var", "fit", "eshd_samples",
      "mll_samples", "coverage_edges", "coverage_trials", "bce_samples", "train_csv", "test_csv", "true_dag_json",
      "output_dir"};
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  RunConfig c;
  try {
    take(j, "d", c.d);
    take(j, "n_train", c.n_train);
    take(j, "n_test", c.n_test);
    take(j, "expected_edges", c.expected_edges);
    take(j, "seed", c.seed);
    take(j, "candidate_k", c.candidate_k);
    take(j, "expansion_factors", c.expansion_factors);
    take(j, "exhaustive_threshold", c.exhaustive_threshold);
    take(j, "oracle", c.oracle);
    take(j, "oracle_budget", c.oracle_budget);
    take(j, "weight_std", c.weight_std);
    take(j, "noise_var", c.noise_var);
    take(j, "eshd_samples", c.eshd_samples);
    take(j, "mll_samples", c.mll_samples);
    take(j, "coverage_edges", c.coverage_edges);
    take(j, "coverage_trials", c.coverage_trials);
    take(j, "bce_samples", c.bce_samples);
    take(j, "train_csv", c.train_csv);
    take(j, "test_csv", c.test_csv);
    take(j, "true_dag_json", c.true_dag_json);
    take(j, "output_dir", c.output_dir);
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      take(f, "learning_rate", c.fit.learning_rate);
      take(f, "iterations", c.fit.iterations);
      take(f, "beta1", c.fit.beta1);
      take(f, "beta2", c.fit.beta2);
      take(f, "epsilon", c.fit.epsilon);
      take(f, "early_stopping", c.fit.early_stopping);
      take(f, "tolerance", c.fit.tolerance);
      take(f, "patience", c.fit.patience);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json RunConfig::to_json() const {
  return {{"d", d},
          {"n_train", n_train},
          {"n_test", n_test},
          {"expected_edges", expected_edges},
          {"seed", seed},
          {"candidate_k", candidate_k},
          {"expansion_factors", expansion_factors},
          {"exhaustive_threshold", exhaustive_threshold},
          {"oracle", oracle},
          {"oracle_budget", oracle_budget},
          {"weight_std", weight_std},
          {"noise_var", noise_var},
          {"fit",
           {{"learning_rate", fit.learning_rate},
            {"iterations", fit.iterations},
            {"beta1", fit.beta1},
            {"beta2", fit.beta2},
            {"epsilon", fit.epsilon},
            {"early_stopping", fit.early_stopping},
            {"tolerance", fit.tolerance},
            {"patience", fit.patience}}},
          {"eshd_samples", eshd_samples},
          {"mll_samples", mll_samples},
          {"coverage_edges", coverage_edges},
          {"coverage_trials", coverage_trials},
          {"bce_samples", bce_samples},
          {"train_csv", train_csv},
          {"test_csv", test_csv},
          {"true_dag_json", true_dag_json},
          {"output_dir", output_dir}};
}

void RunConfig::validate() const {
  if (train_csv.empty() && (d < 1 || d > kMaxVariables)) throw ConfigError("config: d must lie in [1, 64]");
  if (train_csv.empty() && (n_train < 1 || n_test < 1)) throw ConfigError("config: sample counts must be positive");
  if (!expansion_factors.empty() && train_csv.empty() &&
      static_cast<int>(expansion_factors.size()) != regular_layer_count(d))
    throw ConfigError("config: expansion_factors needs ceil(log2 d) entries");
  for (int k : expansion_factors)
    if (k < 1) throw ConfigError("config: expansion factors must be positive");
  if (oracle != "mcmc" && oracle != "random") throw ConfigError("config: oracle must be 'mcmc' or 'random'");
  if (oracle_budget < 0) throw ConfigError("config: oracle_budget must be non-negative");
  if (exhaustive_threshold < 1) throw ConfigError("config: exhaustive_threshold must be positive");
  if (!(noise_var > 0)) throw ConfigError("config: noise_var must be positive");
  if (!(weight_std >= 0)) throw ConfigError("config: weight_std must be non-negative");
  if (eshd_samples < 1 || mll_samples < 1 || coverage_trials < 0 || bce_samples < 1)
    throw ConfigError("config: sample counts must be positive");
  if (!(fit.learning_rate > 0) || fit.iterations < 0) throw ConfigError("config: invalid optimizer settings");
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["e_shd"] = e_shd ? estimate_json(*e_shd) : nlohmann::json(nullptr);
  j["auroc"] = auroc ? nlohmann::json(*auroc) : nlohmann::json(nullptr);
  j["mll"] = mll ? estimate_json(*mll) : nlohmann::json(nullptr);
  j["mse_ce"] = mse_ce ? nlohmann::json(*mse_ce) : nlohmann::json(nullptr);
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& p : coverage) cov.push_back({{"n_edges", p.n_edges}, {"hit_rate", p.hit_rate}, {"trials", p.trials}});
  j["coverage"] = cov;
  j["elbo_initial"] = elbo_initial;
  j["elbo_final"] = elbo_final;
  j["edge_count"] = edge_count;
  j["log_support_orders"] = log_support_orders;
  return j;
}

nlohmann::json circuit_document(const OrderSpn& spn, const LocalScoreTable& scores, const BgeParams& params,
                                const std::string& train_csv) {
  return {{"circuit", spn.to_json()},
          {"scores", scores.to_json()},
          {"bge", {{"alpha_mu", params.alpha_mu}, {"alpha_w", params.alpha_w}, {"t_scale", params.t_scale}}},
          {"train_csv", train_csv}};
}

PipelineResult run_pipeline(const RunConfig& config) {
  config.validate();
  PipelineResult result;
  auto& timings = result.stage_seconds;
  namespace fs = std::filesystem;
  const bool write = !config.output_dir.empty();
  if (write) fs::create_directories(config.output_dir);
  auto out_path = [&](const char* name) { return (fs::path(config.output_dir) / name).string(); };

  Dataset train;
  std::optional<Dataset> test;
  std::optional<LinearGaussianBn> bn;
  stage("data", timings, [&] {
    if (!config.train_csv.empty()) {
      train = read_csv_dataset(config.train_csv);
      if (!config.test_csv.empty()) test = read_csv_dataset(config.test_csv);
      if (!config.true_dag_json.empty()) result.truth = dag_from_json(read_json(config.true_dag_json));
      if (result.truth && result.truth->d() != train.d()) throw ConfigError("true DAG and data disagree on d");
      return;
    }
    const double edges = config.expected_edges < 0 ? 2.0 * config.d : config.expected_edges;
    const Dag truth = sample_erdos_renyi_dag(config.d, edges, derive_seed(config.seed, 0));
    auto [net, data] = sample_weights_and_data(truth, config.n_train, config.weight_std, config.noise_var,
                                               derive_seed(config.seed, 1));
    test = sample_data(net, config.n_test, derive_seed(config.seed, 2));
    train = std::move(data);
    bn = std::move(net);
    result.truth = truth;
  });
  const int d = train.d();
  std::vector<int> factors = config.expansion_factors.empty() ? default_expansion_factors(d) : config.expansion_factors;
  if (static_cast<int>(factors.size()) != regular_layer_count(d))
    throw ConfigError("config: expansion_factors needs ceil(log2 d) entries");
  const BgeParams params = BgeParams::defaults(d);
  const int k = config.candidate_k < 0 ? std::min(d - 1, 8) : config.candidate_k;
  if (k > d - 1) throw ConfigError("candidates: candidate_k must be at most d - 1");

  const auto candidates = stage("candidates", timings, [&] {
    return k == d - 1 ? full_candidates(d) : select_candidates(train, k, params);
  });
  result.scores = stage("scores", timings, [&] { return build_score_table(train, candidates, params); });
  const LeafTable leaf = stage("leaves", timings, [&] { return LeafTable(result.scores); });

  result.spn = stage("circuit", timings, [&] {
    BuildOptions options;
    options.expansion_factors = factors;
    options.exhaustive_threshold = config.exhaustive_threshold;
    options.seed = circuit_build_seed(config);
    options.on_warning = [](const std::string&) {};
    const OrderMcmcOracle oracle(leaf, config.oracle == "mcmc" ? config.oracle_budget : 0);
    return build_regular(leaf, oracle, options);
  });
  stage("fit", timings, [&] { result.trace = fit(result.spn, leaf, config.fit); });

  MetricsReport& report = result.report;
  report.elbo_initial = result.trace.elbo.front();
  report.elbo_final = result.trace.elbo.back();
  const SizeAndSupport size = size_and_support(result.spn);
  report.edge_count = size.edge_count;
  report.log_support_orders = size.log_support_orders;

  Eigen::MatrixXd bce;
  stage("metrics", timings, [&] {
    if (result.truth) {
      const Dag& truth = *result.truth;
      if (d >= 2) report.auroc = metric_auroc(result.spn, leaf, truth);
      report.e_shd = metric_eshd(result.spn, leaf, truth, config.eshd_samples, derive_seed(config.seed, 4));
      std::vector<int> cov_edges;
      for (int n : config.coverage_edges)
        if (n <= truth.edge_count()) cov_edges.push_back(n);
      report.coverage = coverage_experiment(result.spn, leaf, truth, cov_edges, config.coverage_trials,
                                            derive_seed(config.seed, 5));
    }
    if (test) report.mll = metric_mll(result.spn, leaf, *test, params, config.mll_samples, derive_seed(config.seed, 6));
    if (train.n() >= 2) {
      BgeWeightOptions opt;
      opt.sample_count = config.bce_samples;
      opt.seed = derive_seed(config.seed, 7);
      const BgePosteriorWeightModel model(train, params, candidates, opt);
      bce = bce_matrix(result.spn, leaf, model);
      if (bn) report.mse_ce = mse_ce(bce, bn->total_effects());
    }
  });

  if (write) {
    stage("artifacts", timings, [&] {
      std::string train_path = config.train_csv;
      if (train_path.empty()) {
        write_csv_dataset(out_path("train.csv"), train);
        train_path = "train.csv";
      } else {
        train_path = fs::absolute(train_path).string();
      }
      if (test && config.test_csv.empty()) write_csv_dataset(out_path("test.csv"), *test);
      if (result.truth) write_json(out_path("true_dag.json"), dag_to_json(*result.truth));
      write_json(out_path("circuit.json"), circuit_document(result.spn, result.scores, params, train_path));
      write_json(out_path("metrics.json"), report.to_json());
      if (bce.size() > 0) write_matrix_csv(out_path("bce.csv"), bce);
      std::ofstream trace(out_path("elbo_trace.csv"));
      trace << "iteration,elbo\n";
      trace.precision(17);
      for (std::size_t t = 0; t < result.trace.elbo.size(); ++t) trace << t << ',' << result.trace.elbo[t] << '\n';
      std::ofstream cov(out_path("coverage.csv"));
      cov << "n_edges,hit_rate,trials\n";
      for (const auto& p : report.coverage) cov << p.n_edges << ',' << p.hit_rate << ',' << p.trials << '\n';
    });
  }
  return result;
}

std::uint64_t circuit_build_seed(const RunConfig& config) { return derive_seed(config.seed, 3); }

std::vector<std::vector<int>> root_oracle_orders(const RunConfig& config, const LeafTable& leaf, int count) {
  const OrderMcmcOracle oracle(leaf, config.oracle == "mcmc" ? config.oracle_budget : 0);
  return oracle.sample_orders({}, ParentSet::all(leaf.d()), count, oracle_call_seed(circuit_build_seed(config), 0, 0, 0));
}

}  // namespace orderspn
