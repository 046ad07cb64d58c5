#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "orderspn/circuit.hpp"
#include "orderspn/elbo.hpp"
#include "orderspn/metrics.hpp"
#include "orderspn/score.hpp"

namespace orderspn {

struct RunConfig {
  int d = 16;
  int n_train = 100;
  int n_test = 1000;
  double expected_edges = -1;  // < 0 means 2d
  std::uint64_t seed = 0;
  int candidate_k = -1;  // < 0 means min(d - 1, 8); d - 1 means full candidate sets
  std::vector<int> expansion_factors;  // empty means the default for d
  int exhaustive_threshold = 4;
  std::string oracle = "mcmc";  // "mcmc" or "random"
  int oracle_budget = 20000;
  double weight_std = 1.0;
  double noise_var = 0.1;
  FitConfig fit;
  int eshd_samples = 1000;
  int mll_samples = 1000;
  std::vector<int> coverage_edges = {4, 8, 16};
  int coverage_trials = 50;
  int bce_samples = 64;
  // Optional external inputs; when train_csv is set no data are generated.
  std::string train_csv;
  std::string test_csv;
  std::string true_dag_json;
  std::string output_dir;  // empty: no artifacts

  // Throws ConfigError on unknown keys or invalid values.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

// K = [64, 16, 6, 2] padded or truncated to ceil(log2 d) layers and clipped to the
// number of available partitions per layer.
std::vector<int> default_expansion_factors(int d);

struct MetricsReport {
  std::optional<MonteCarloEstimate> e_shd;
  std::optional<double> auroc;
  std::optional<MonteCarloEstimate> mll;
  std::optional<double> mse_ce;
  std::vector<CoveragePoint> coverage;
  double elbo_initial = 0.0;
  double elbo_final = 0.0;
  std::size_t edge_count = 0;
  double log_support_orders = 0.0;

  nlohmann::json to_json() const;
};

struct PipelineResult {
  MetricsReport report;
  OrderSpn spn;
  LocalScoreTable scores;
  FitTrace trace;
  std::optional<Dag> truth;
  std::vector<std::pair<std::string, double>> stage_seconds;
};

// data -> candidates -> scores -> leaf tables -> circuit -> fit -> metrics, with
// artifacts written to config.output_dir. Errors carry the failing stage's name.
PipelineResult run_pipeline(const RunConfig& config);

// Build seed handed to build_regular by run_pipeline.
std::uint64_t circuit_build_seed(const RunConfig& config);

// `count` orders from the same oracle chain that chose the root's partitions.
std::vector<std::vector<int>> root_oracle_orders(const RunConfig& config, const LeafTable& leaf, int count);

// Self-contained circuit file: structure, weights, score table and BGe settings.
nlohmann::json circuit_document(const OrderSpn& spn, const LocalScoreTable& scores, const BgeParams& params,
                                const std::string& train_csv);

}  // namespace orderspn
