#pragma once

#include <vector>

#include <Eigen/Dense>

#include "orderspn/leaf.hpp"
#include "orderspn/model.hpp"
#include "orderspn/score.hpp"

namespace orderspn {

inline constexpr int kExactMaxVariables = 5;

// Every (order, graph) pair with G |= order and G_i ⊆ C_i, with log-mass
// sum_i log pi_i(G_i). Entries are ordered by (order index, graph).
class ExactPosterior {
 public:
  struct Entry {
    std::uint32_t order = 0;  // index into orders()
    Dag dag;
    double log_mass = 0.0;
  };

  ExactPosterior(LocalScoreTable scores, std::vector<Order> orders, std::vector<Entry> entries);

  int d() const { return scores_.d(); }
  const LocalScoreTable& scores() const { return scores_; }
  const std::vector<Order>& orders() const { return orders_; }
  const std::vector<Entry>& entries() const { return entries_; }
  double log_z() const { return log_z_; }
  double log_prob(const Entry& e) const { return e.log_mass - log_z_; }
  // log p(order, dag); -inf when the dag is not consistent with the order or leaves C.
  double log_prob(const Order& order, const Dag& dag) const;

 private:
  LocalScoreTable scores_;
  std::vector<Order> orders_;
  std::vector<Entry> entries_;
  double log_z_ = 0.0;
};

// Rejects d > 5.
ExactPosterior enumerate_posterior(const LocalScoreTable& scores, int d);

// log Z by a second, independent route: graphs outer, orders inner.
double log_z_by_graph(const LocalScoreTable& scores);

double exact_marginal(const ExactPosterior& post, const EdgeConjunction& c);
// Throws InfeasibleError when p(given) = 0.
double exact_conditional(const ExactPosterior& post, const EdgeConjunction& c, const EdgeConjunction& given);

struct ExactMpe {
  double log_prob = kNegInf;  // max log p(order, dag | given)
  Order order;
  Dag dag;
};
// First maximiser in enumeration order. Throws InfeasibleError when p(given) = 0.
ExactMpe exact_mpe(const ExactPosterior& post, const EdgeConjunction& given);

// sum p(order, dag) * pathsum(dag, weights).
Eigen::MatrixXd exact_bce(const ExactPosterior& post, const Eigen::MatrixXd& weights);
// (j, i) = p(j -> i).
Eigen::MatrixXd exact_edge_marginals(const ExactPosterior& post);

// Graph marginals p(G) = sum over orders, sorted by the graph's columns.
std::vector<std::pair<Dag, double>> exact_graph_distribution(const ExactPosterior& post,
                                                             const EdgeConjunction* given = nullptr);

}  // namespace orderspn
