#include "orderspn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orderspn/error.hpp"
#include "orderspn/infer.hpp"
#include "orderspn/threads.hpp"

namespace orderspn {

MonteCarloEstimate summarize(const std::vector<double>& values) {
  MonteCarloEstimate out;
  out.samples = static_cast<int>(values.size());
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (values.size() - 1) / values.size());
  }
  return out;
}

std::optional<double> auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ConfigError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && scores[idx[hi + 1]] == scores[idx[lo]]) ++hi;
    const double avg = 0.5 * static_cast<double>(lo + hi) + 1.0;
    for (std::size_t k = lo; k <= hi; ++k) rank[idx[k]] = avg;
    lo = hi + 1;
  }
  double pos = 0;
  double rank_sum = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k]) {
      pos += 1;
      rank_sum += rank[k];
    }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

std::optional<double> auroc_from_marginals(const Eigen::MatrixXd& marginals, const Dag& truth) {
  const int d = truth.d();
  std::vector<double> scores;
  std::vector<bool> labels;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      scores.push_back(marginals(j, i));
      labels.push_back(truth.has_edge(j, i));
    }
  return auroc(scores, labels);
}

std::optional<double> metric_auroc(const OrderSpn& spn, const LeafTable& leaf, const Dag& truth) {
  if (truth.d() < 2) throw ConfigError("metric_auroc: needs d >= 2");
  return auroc_from_marginals(edge_marginals(spn, leaf), truth);
}

MonteCarloEstimate metric_eshd(const OrderSpn& spn, const LeafTable& leaf, const Dag& truth, int samples,
                               std::uint64_t seed) {
  if (samples < 1) throw ConfigError("metric_eshd: needs at least one sample");
  const auto draws = sample_many(spn, leaf, samples, seed);
  const auto target = essential_graph(truth);
  std::vector<double> values(samples);
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < samples; ++k) values[k] = shd(essential_graph(draws[k].dag), target);
  return summarize(values);
}

MonteCarloEstimate metric_mll(const OrderSpn& spn, const LeafTable& leaf, const Dataset& test_data,
                              const BgeParams& params, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("metric_mll: needs at least one sample");
  if (test_data.n() < 1) throw ConfigError("metric_mll: empty test data");
  const BgeScorer scorer(test_data, params);
  const auto draws = sample_many(spn, leaf, samples, seed);
  std::vector<double> values(samples);
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < samples; ++k) {
    double total = 0.0;
    for (int i = 0; i < spn.d(); ++i) total += scorer.local_score(i, draws[k].dag.parents(i));
    values[k] = total;
  }
  return summarize(values);
}

double mse_ce(const Eigen::MatrixXd& bce, const Eigen::MatrixXd& true_effects) {
  const auto d = bce.rows();
  if (d < 2) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j) acc += (bce(i, j) - true_effects(i, j)) * (bce(i, j) - true_effects(i, j));
  return acc / static_cast<double>(d * (d - 1));
}

double metric_mse_ce(const OrderSpn& spn, const LeafTable& leaf, const LeafWeightModel& model,
                     const LinearGaussianBn& truth) {
  return mse_ce(bce_matrix(spn, leaf, model), path_sum_effects(truth.dag, truth.weights));
}

std::vector<std::pair<int, int>> coverage_selection(const Dag& truth, int n_edges, int trial, std::uint64_t seed) {
  auto edges = truth.edges();
  if (n_edges < 0 || n_edges > static_cast<int>(edges.size()))
    throw ConfigError("coverage: the true graph has fewer edges than requested");
  Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(n_edges)), static_cast<std::uint64_t>(trial)));
  std::shuffle(edges.begin(), edges.end(), rng);
  edges.resize(n_edges);
  return edges;
}

std::vector<CoveragePoint> coverage_experiment(const OrderSpn& spn, const LeafTable& leaf, const Dag& truth,
                                               const std::vector<int>& n_edges_list, int trials, std::uint64_t seed) {
  std::vector<CoveragePoint> out;
  for (int n : n_edges_list) {
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
      EdgeConjunction c(truth.d());
      for (const auto& [from, to] : coverage_selection(truth, n, t, seed)) c.require(from, to);
      hits += marginal(spn, leaf, c) > kNegInf ? 1 : 0;
    }
    out.push_back({n, trials > 0 ? static_cast<double>(hits) / trials : 0.0, trials});
  }
  return out;
}

std::vector<CoveragePoint> coverage_of_graphs(const std::vector<Dag>& dags, const Dag& truth,
                                              const std::vector<int>& n_edges_list, int trials, std::uint64_t seed) {
  std::vector<CoveragePoint> out;
  for (int n : n_edges_list) {
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
      EdgeConjunction c(truth.d());
      for (const auto& [from, to] : coverage_selection(truth, n, t, seed)) c.require(from, to);
      hits += std::any_of(dags.begin(), dags.end(), [&](const Dag& g) { return c.satisfied_by(g); }) ? 1 : 0;
    }
    out.push_back({n, trials > 0 ? static_cast<double>(hits) / trials : 0.0, trials});
  }
  return out;
}

Eigen::MatrixXd order_average_edge_marginals(const LeafTable& leaf, const std::vector<std::vector<int>>& orders) {
  const int d = leaf.d();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  if (orders.empty()) return out;
  for (const auto& perm : orders) {
    const Order order(perm);
    for (int i = 0; i < d; ++i) {
      const ParentSet before = order.predecessors(i);
      for (int j : (before & leaf.candidates(i)).members())
        out(j, i) += std::exp(leaf.marginal(i, before, ParentSet::single(j), ParentSet{}));
    }
  }
  return out / static_cast<double>(orders.size());
}

std::vector<Dag> sample_graphs_for_orders(const LeafTable& leaf, const std::vector<std::vector<int>>& orders,
                                          std::uint64_t seed) {
  std::vector<Dag> out;
  Rng rng(seed);
  for (const auto& perm : orders) {
    const Order order(perm);
    Dag dag(leaf.d());
    for (int i = 0; i < leaf.d(); ++i) dag.set_parents(i, leaf.sample(i, order.predecessors(i), {}, {}, rng));
    out.push_back(std::move(dag));
  }
  return out;
}

}  // namespace orderspn
