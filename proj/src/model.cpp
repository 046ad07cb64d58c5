#include "orderspn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "orderspn/error.hpp"

namespace orderspn {

ParentSet ParentSet::of(std::initializer_list<int> members) {
  ParentSet out;
  for (int m : members) out = out.with(m);
  return out;
}

std::vector<int> ParentSet::members() const {
  std::vector<int> out;
  out.reserve(size());
  for (std::uint64_t rest = bits_; rest != 0; rest &= rest - 1) out.push_back(std::countr_zero(rest));
  return out;
}

Dag::Dag(int d) {
  if (d < 0 || d > kMaxVariables) throw ConfigError("Dag: variable count out of range");
  parents_.assign(d, ParentSet{});
}

Dag::Dag(std::vector<ParentSet> parents) : parents_(std::move(parents)) {
  if (d() > kMaxVariables) throw ConfigError("Dag: more than 64 variables");
  const ParentSet universe = ParentSet::all(d());
  for (int i = 0; i < d(); ++i) {
    if (parents_[i].contains(i)) throw ConfigError("Dag: self-loop on variable " + std::to_string(i));
    if (!parents_[i].subset_of(universe)) throw ConfigError("Dag: parent index out of range");
  }
}

void Dag::set_parents(int i, ParentSet parents) {
  if (parents.contains(i)) throw ConfigError("Dag: self-loop on variable " + std::to_string(i));
  if (!parents.subset_of(ParentSet::all(d()))) throw ConfigError("Dag: parent index out of range");
  parents_[i] = parents;
}

void Dag::add_edge(int from, int to) {
  if (from == to) throw ConfigError("Dag: self-loop");
  parents_.at(to) = parents_.at(to).with(from);
}

int Dag::edge_count() const {
  int total = 0;
  for (ParentSet p : parents_) total += p.size();
  return total;
}

std::optional<std::vector<int>> Dag::topological_order() const {
  const int n = d();
  std::vector<int> order;
  order.reserve(n);
  ParentSet placed;
  while (static_cast<int>(order.size()) < n) {
    int next = -1;
    for (int i = 0; i < n; ++i) {
      if (!placed.contains(i) && parents_[i].subset_of(placed)) {
        next = i;
        break;
      }
    }
    if (next < 0) return std::nullopt;
    order.push_back(next);
    placed = placed.with(next);
  }
  return order;
}

std::vector<std::pair<int, int>> Dag::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int to = 0; to < d(); ++to)
    for (int from : parents_[to].members()) out.emplace_back(from, to);
  return out;
}

Order::Order(std::vector<int> perm) : perm_(std::move(perm)) {
  std::vector<bool> seen(perm_.size(), false);
  for (int v : perm_) {
    if (v < 0 || v >= d() || seen[v]) throw ConfigError("Order: not a permutation");
    seen[v] = true;
  }
}

ParentSet Order::predecessors(int var) const {
  ParentSet out;
  for (int v : perm_) {
    if (v == var) return out;
    out = out.with(v);
  }
  throw ConfigError("Order: variable not present");
}

bool Order::admits(const Dag& dag) const {
  if (dag.d() != d()) return false;
  ParentSet before;
  for (int v : perm_) {
    if (!dag.parents(v).subset_of(before)) return false;
    before = before.with(v);
  }
  return true;
}

Eigen::MatrixXd path_sum_effects(const Dag& dag, const Eigen::MatrixXd& weights) {
  const int d = dag.d();
  Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(d, d);
  for (auto [from, to] : dag.edges()) adjacency(from, to) = weights(from, to);
  // Nilpotent for a DAG, so the series stops after d - 1 terms.
  Eigen::MatrixXd power = adjacency;
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, d);
  for (int len = 1; len < d; ++len) {
    total += power;
    power = power * adjacency;
  }
  return total;
}

Eigen::MatrixXd LinearGaussianBn::total_effects() const { return path_sum_effects(dag, weights); }

void Dataset::validate() const {
  if (!rows.allFinite()) throw NumericalError("Dataset: non-finite entry");
}

Dag sample_erdos_renyi_dag(int d, double expected_edges, std::uint64_t seed) {
  if (d < 1) throw ConfigError("sample_erdos_renyi_dag: d must be positive");
  if (d > kMaxVariables) throw ConfigError("sample_erdos_renyi_dag: d exceeds 64");
  if (expected_edges < 0) throw ConfigError("sample_erdos_renyi_dag: negative expected edge count");
  std::mt19937_64 rng(seed);
  std::vector<int> labels(d);
  std::iota(labels.begin(), labels.end(), 0);
  std::shuffle(labels.begin(), labels.end(), rng);
  const double pairs = 0.5 * d * (d - 1);
  const double p = pairs > 0 ? std::clamp(expected_edges / pairs, 0.0, 1.0) : 0.0;
  std::bernoulli_distribution coin(p);
  Dag dag(d);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      if (coin(rng)) dag.add_edge(labels[a], labels[b]);
  return dag;
}

Dataset sample_data(const LinearGaussianBn& bn, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_data: n must be positive");
  const int d = bn.dag.d();
  const auto topo = bn.dag.topological_order();
  if (!topo) throw ConfigError("sample_data: graph is cyclic");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Dataset data{Eigen::MatrixXd::Zero(n, d)};
  for (int row = 0; row < n; ++row) {
    for (int v : *topo) {
      double x = bn.bias(v) + std::sqrt(bn.noise_vars(v)) * unit(rng);
      for (int p : bn.dag.parents(v).members()) x += bn.weights(p, v) * data.rows(row, p);
      data.rows(row, v) = x;
    }
  }
  data.validate();
  return data;
}

std::pair<LinearGaussianBn, Dataset> sample_weights_and_data(const Dag& dag, int n, double weight_std,
                                                             double noise_var, std::uint64_t seed) {
  if (!(noise_var > 0)) throw ConfigError("sample_weights_and_data: noise_var must be positive");
  if (n < 1) throw ConfigError("sample_weights_and_data: n must be positive");
  const int d = dag.d();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> weight(0.0, weight_std);
  LinearGaussianBn bn{dag, Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Constant(d, noise_var),
                      Eigen::VectorXd::Zero(d)};
  for (auto [from, to] : dag.edges()) bn.weights(from, to) = weight(rng);
  Dataset data = sample_data(bn, n, rng());
  return {std::move(bn), std::move(data)};
}

EdgeMark PartiallyDirectedGraph::mark(int a, int b) const {
  const EdgeMark m = marks_[static_cast<std::size_t>(std::min(a, b)) * d_ + std::max(a, b)];
  if (a < b || m == EdgeMark::kNone || m == EdgeMark::kUndirected) return m;
  return m == EdgeMark::kForward ? EdgeMark::kBackward : EdgeMark::kForward;
}

void PartiallyDirectedGraph::set_directed(int from, int to) {
  marks_[static_cast<std::size_t>(std::min(from, to)) * d_ + std::max(from, to)] =
      from < to ? EdgeMark::kForward : EdgeMark::kBackward;
}

void PartiallyDirectedGraph::set_undirected(int a, int b) {
  marks_[static_cast<std::size_t>(std::min(a, b)) * d_ + std::max(a, b)] = EdgeMark::kUndirected;
}

void PartiallyDirectedGraph::clear(int a, int b) {
  marks_[static_cast<std::size_t>(std::min(a, b)) * d_ + std::max(a, b)] = EdgeMark::kNone;
}

int PartiallyDirectedGraph::adjacency_count() const {
  return static_cast<int>(std::count_if(marks_.begin(), marks_.end(), [](EdgeMark m) { return m != EdgeMark::kNone; }));
}

PartiallyDirectedGraph to_pdag(const Dag& dag) {
  PartiallyDirectedGraph out(dag.d());
  for (auto [from, to] : dag.edges()) out.set_directed(from, to);
  return out;
}

int shd(const PartiallyDirectedGraph& g1, const PartiallyDirectedGraph& g2) {
  if (g1.d() != g2.d()) throw ConfigError("shd: dimension mismatch");
  int distance = 0;
  for (int a = 0; a < g1.d(); ++a)
    for (int b = a + 1; b < g1.d(); ++b)
      if (g1.mark(a, b) != g2.mark(a, b)) ++distance;
  return distance;
}

}  // namespace orderspn
