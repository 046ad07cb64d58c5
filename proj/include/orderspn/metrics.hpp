#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "orderspn/causal.hpp"
#include "orderspn/circuit.hpp"
#include "orderspn/leaf.hpp"
#include "orderspn/model.hpp"
#include "orderspn/score.hpp"

namespace orderspn {

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

MonteCarloEstimate summarize(const std::vector<double>& values);

// Rank statistic with tied scores sharing their average rank. nullopt when one
// class is empty.
std::optional<double> auroc(const std::vector<double>& scores, const std::vector<bool>& labels);
// Over all d(d-1) ordered pairs (j, i), j != i, scored by marginals(j, i).
std::optional<double> auroc_from_marginals(const Eigen::MatrixXd& marginals, const Dag& truth);

// Exact edge marginals from the circuit; nullopt when the true graph is empty or complete.
std::optional<double> metric_auroc(const OrderSpn& spn, const LeafTable& leaf, const Dag& truth);

// Mean SHD between the CPDAGs of sampled graphs and of the true graph.
MonteCarloEstimate metric_eshd(const OrderSpn& spn, const LeafTable& leaf, const Dag& truth, int samples,
                               std::uint64_t seed);

// Mean held-out BGe log marginal likelihood (no structure prior) of sampled graphs.
MonteCarloEstimate metric_mll(const OrderSpn& spn, const LeafTable& leaf, const Dataset& test_data,
                              const BgeParams& params, int samples, std::uint64_t seed);

double mse_ce(const Eigen::MatrixXd& bce, const Eigen::MatrixXd& true_effects);
double metric_mse_ce(const OrderSpn& spn, const LeafTable& leaf, const LeafWeightModel& model,
                     const LinearGaussianBn& truth);

struct CoveragePoint {
  int n_edges = 0;
  double hit_rate = 0.0;
  int trials = 0;
};

// For each n, `trials` random sets of n true edges; a hit is a positive
// conjunction with non-zero circuit probability. The edge selections depend only
// on (truth, n, trial, seed), so other estimators can reuse them.
std::vector<CoveragePoint> coverage_experiment(const OrderSpn& spn, const LeafTable& leaf, const Dag& truth,
                                               const std::vector<int>& n_edges_list, int trials, std::uint64_t seed);
// Same selections; a hit is any graph in `dags` containing all selected edges.
std::vector<CoveragePoint> coverage_of_graphs(const std::vector<Dag>& dags, const Dag& truth,
                                              const std::vector<int>& n_edges_list, int trials, std::uint64_t seed);
// The selection used by both coverage functions.
std::vector<std::pair<int, int>> coverage_selection(const Dag& truth, int n_edges, int trial, std::uint64_t seed);

// Baselines built from raw orders: edge marginals averaged exactly over the leaf
// distributions given each order, and one graph drawn per order.
Eigen::MatrixXd order_average_edge_marginals(const LeafTable& leaf, const std::vector<std::vector<int>>& orders);
std::vector<Dag> sample_graphs_for_orders(const LeafTable& leaf, const std::vector<std::vector<int>>& orders,
                                          std::uint64_t seed);

}  // namespace orderspn
