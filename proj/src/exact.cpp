#include "orderspn/exact.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "orderspn/error.hpp"
#include "orderspn/math.hpp"

namespace orderspn {

ExactPosterior::ExactPosterior(LocalScoreTable scores, std::vector<Order> orders, std::vector<Entry> entries)
    : scores_(std::move(scores)), orders_(std::move(orders)), entries_(std::move(entries)) {
  std::vector<double> masses;
  masses.reserve(entries_.size());
  for (const Entry& e : entries_) masses.push_back(e.log_mass);
  log_z_ = log_sum_exp(masses);
}

double ExactPosterior::log_prob(const Order& order, const Dag& dag) const {
  if (!order.admits(dag)) return kNegInf;
  double total = 0.0;
  for (int i = 0; i < d(); ++i) {
    if (!dag.parents(i).subset_of(scores_.candidates(i))) return kNegInf;
    total += scores_.log_score(i, dag.parents(i));
  }
  return total - log_z_;
}

namespace {

// Calls visit(dag) for every graph with G_i ⊆ allowed[i], in mixed-radix order
// with variable 0 varying fastest.
template <typename Visit>
void for_each_graph(const std::vector<ParentSet>& allowed, Visit&& visit) {
  const int d = static_cast<int>(allowed.size());
  std::vector<std::vector<int>> members(d);
  std::uint64_t total = 1;
  for (int i = 0; i < d; ++i) {
    members[i] = allowed[i].members();
    total <<= members[i].size();
  }
  Dag dag(d);
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t rest = code;
    for (int i = 0; i < d; ++i) {
      const int k = static_cast<int>(members[i].size());
      const std::uint64_t local = rest & ((std::uint64_t{1} << k) - 1);
      rest >>= k;
      ParentSet g;
      for (int b = 0; b < k; ++b)
        if ((local >> b) & 1U) g = g.with(members[i][b]);
      dag.set_parents(i, g);
    }
    visit(dag);
  }
}

double graph_mass(const LocalScoreTable& scores, const Dag& dag) {
  double total = 0.0;
  for (int i = 0; i < dag.d(); ++i) total += scores.log_score(i, dag.parents(i));
  return total;
}

void check_d(const LocalScoreTable& scores, int d) {
  if (d != scores.d()) throw ConfigError("exact oracle: score table has a different d");
  if (d < 1 || d > kExactMaxVariables) throw ConfigError("exact oracle: d must lie in [1, 5]");
}

}  // namespace

ExactPosterior enumerate_posterior(const LocalScoreTable& scores, int d) {
  check_d(scores, d);
  std::vector<Order> orders;
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  do orders.emplace_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));

  std::vector<std::vector<ExactPosterior::Entry>> per_order(orders.size());
  const auto order_count = static_cast<std::int64_t>(orders.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t o = 0; o < order_count; ++o) {
    std::vector<ParentSet> allowed(d);
    for (int i = 0; i < d; ++i) allowed[i] = orders[o].predecessors(i) & scores.candidates(i);
    for_each_graph(allowed, [&](const Dag& dag) {
      per_order[o].push_back({static_cast<std::uint32_t>(o), dag, graph_mass(scores, dag)});
    });
  }
  std::vector<ExactPosterior::Entry> entries;
  for (auto& chunk : per_order)
    for (auto& e : chunk) entries.push_back(std::move(e));
  return ExactPosterior(scores, std::move(orders), std::move(entries));
}

double log_z_by_graph(const LocalScoreTable& scores) {
  const int d = scores.d();
  check_d(scores, d);
  std::vector<Order> orders;
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  do orders.emplace_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<double> terms;
  for_each_graph(scores.candidate_sets(), [&](const Dag& dag) {
    int consistent = 0;
    for (const Order& o : orders) consistent += o.admits(dag) ? 1 : 0;
    if (consistent > 0) terms.push_back(graph_mass(scores, dag) + std::log(static_cast<double>(consistent)));
  });
  return log_sum_exp(terms);
}

double exact_marginal(const ExactPosterior& post, const EdgeConjunction& c) {
  std::vector<double> terms;
  for (const auto& e : post.entries())
    if (c.satisfied_by(e.dag)) terms.push_back(post.log_prob(e));
  return std::min(0.0, log_sum_exp(terms));
}

double exact_conditional(const ExactPosterior& post, const EdgeConjunction& c, const EdgeConjunction& given) {
  const double denom = exact_marginal(post, given);
  if (denom == kNegInf) throw InfeasibleError("exact_conditional: the condition has probability zero");
  const auto joint = EdgeConjunction::conjoin(c, given);
  if (!joint) return kNegInf;
  return std::min(0.0, exact_marginal(post, *joint) - denom);
}

ExactMpe exact_mpe(const ExactPosterior& post, const EdgeConjunction& given) {
  const double denom = exact_marginal(post, given);
  if (denom == kNegInf) throw InfeasibleError("exact_mpe: the condition has probability zero");
  const ExactPosterior::Entry* best = nullptr;
  for (const auto& e : post.entries())
    if (given.satisfied_by(e.dag) && (!best || e.log_mass > best->log_mass)) best = &e;
  return {std::min(0.0, post.log_prob(*best) - denom), post.orders()[best->order], best->dag};
}

Eigen::MatrixXd exact_bce(const ExactPosterior& post, const Eigen::MatrixXd& weights) {
  const int d = post.d();
  if (weights.rows() != d || weights.cols() != d) throw ConfigError("exact_bce: weight matrix has wrong shape");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (const auto& e : post.entries()) {
    // Explicit path enumeration by depth-first search from every source.
    Eigen::MatrixXd effects = Eigen::MatrixXd::Zero(d, d);
    for (int src = 0; src < d; ++src) {
      std::vector<std::pair<int, double>> frontier{{src, 1.0}};
      while (!frontier.empty()) {
        const auto [node, prod] = frontier.back();
        frontier.pop_back();
        for (int child = 0; child < d; ++child) {
          if (!e.dag.has_edge(node, child)) continue;
          const double w = prod * weights(node, child);
          effects(src, child) += w;
          frontier.emplace_back(child, w);
        }
      }
    }
    out += std::exp(post.log_prob(e)) * effects;
  }
  return out;
}

Eigen::MatrixXd exact_edge_marginals(const ExactPosterior& post) {
  const int d = post.d();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (const auto& e : post.entries()) {
    const double p = std::exp(post.log_prob(e));
    for (const auto& [from, to] : e.dag.edges()) out(from, to) += p;
  }
  return out;
}

std::vector<std::pair<Dag, double>> exact_graph_distribution(const ExactPosterior& post, const EdgeConjunction* given) {
  std::map<std::vector<std::uint64_t>, std::pair<Dag, double>> acc;
  double norm = 0.0;
  for (const auto& e : post.entries()) {
    if (given && !given->satisfied_by(e.dag)) continue;
    std::vector<std::uint64_t> key;
    for (ParentSet g : e.dag.columns()) key.push_back(g.bits());
    const double p = std::exp(post.log_prob(e));
    auto [it, inserted] = acc.try_emplace(key, e.dag, 0.0);
    it->second.second += p;
    norm += p;
  }
  if (norm <= 0) throw InfeasibleError("exact_graph_distribution: the condition has probability zero");
  std::vector<std::pair<Dag, double>> out;
  for (auto& [key, value] : acc) out.emplace_back(value.first, value.second / norm);
  return out;
}

}  // namespace orderspn
