#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace orderspn {

inline constexpr int kMaxVariables = 64;

// Set of variable indices backed by a 64-bit mask.
class ParentSet {
 public:
  constexpr ParentSet() = default;
  constexpr explicit ParentSet(std::uint64_t bits) : bits_(bits) {}

  static ParentSet of(std::initializer_list<int> members);
  // {0, ..., d-1}
  static constexpr ParentSet all(int d) {
    return ParentSet(d >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << d) - 1);
  }
  static constexpr ParentSet single(int i) { return ParentSet(std::uint64_t{1} << i); }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool contains(int i) const { return (bits_ >> i) & 1U; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool subset_of(ParentSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool intersects(ParentSet other) const { return (bits_ & other.bits_) != 0; }

  constexpr ParentSet with(int i) const { return ParentSet(bits_ | (std::uint64_t{1} << i)); }
  constexpr ParentSet without(int i) const { return ParentSet(bits_ & ~(std::uint64_t{1} << i)); }

  // Members in increasing order.
  std::vector<int> members() const;

  friend constexpr ParentSet operator|(ParentSet a, ParentSet b) { return ParentSet(a.bits_ | b.bits_); }
  friend constexpr ParentSet operator&(ParentSet a, ParentSet b) { return ParentSet(a.bits_ & b.bits_); }
  // Set difference.
  friend constexpr ParentSet operator-(ParentSet a, ParentSet b) { return ParentSet(a.bits_ & ~b.bits_); }
  friend constexpr bool operator==(ParentSet, ParentSet) = default;
  friend constexpr auto operator<=>(ParentSet a, ParentSet b) { return a.bits_ <=> b.bits_; }

 private:
  std::uint64_t bits_ = 0;
};

// Column-wise DAG: parents(i) is the parent set of variable i.
class Dag {
 public:
  Dag() = default;
  explicit Dag(int d);
  explicit Dag(std::vector<ParentSet> parents);

  int d() const { return static_cast<int>(parents_.size()); }
  ParentSet parents(int i) const { return parents_[i]; }
  const std::vector<ParentSet>& columns() const { return parents_; }
  void set_parents(int i, ParentSet parents);
  void add_edge(int from, int to);
  bool has_edge(int from, int to) const { return parents_[to].contains(from); }
  int edge_count() const;

  bool is_acyclic() const { return topological_order().has_value(); }
  // Kahn's algorithm; smallest available index first. nullopt on a cycle.
  std::optional<std::vector<int>> topological_order() const;
  // Directed (from, to) pairs in (to, from) lexicographic order.
  std::vector<std::pair<int, int>> edges() const;

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  std::vector<ParentSet> parents_;
};

// Permutation of 0..d-1; perm[0] comes first.
class Order {
 public:
  Order() = default;
  explicit Order(std::vector<int> perm);

  int d() const { return static_cast<int>(perm_.size()); }
  const std::vector<int>& perm() const { return perm_; }
  int operator[](int position) const { return perm_[position]; }
  // Variables placed before `var`.
  ParentSet predecessors(int var) const;
  // G |= sigma: every parent precedes its child.
  bool admits(const Dag& dag) const;

  friend bool operator==(const Order&, const Order&) = default;

 private:
  std::vector<int> perm_;
};

// X = X B + bias + eps, eps_i ~ N(0, noise_vars[i]); weights(i, j) is the weight of edge i -> j.
struct LinearGaussianBn {
  Dag dag;
  Eigen::MatrixXd weights;
  Eigen::VectorXd noise_vars;
  Eigen::VectorXd bias;

  // Sum over directed paths of edge-weight products, (I - B)^{-1} - I.
  Eigen::MatrixXd total_effects() const;
};

struct Dataset {
  Eigen::MatrixXd rows;  // N x d

  int n() const { return static_cast<int>(rows.rows()); }
  int d() const { return static_cast<int>(rows.cols()); }
  void validate() const;
};

// Path-sum causal effects of `weights` restricted to the edges of `dag`.
Eigen::MatrixXd path_sum_effects(const Dag& dag, const Eigen::MatrixXd& weights);

Dag sample_erdos_renyi_dag(int d, double expected_edges, std::uint64_t seed);

std::pair<LinearGaussianBn, Dataset> sample_weights_and_data(const Dag& dag, int n, double weight_std,
                                                             double noise_var, std::uint64_t seed);

// Fresh rows from an existing network (held-out data).
Dataset sample_data(const LinearGaussianBn& bn, int n, std::uint64_t seed);

// Mark for an unordered pair {a, b} with a < b.
enum class EdgeMark : std::uint8_t { kNone, kForward, kBackward, kUndirected };

class PartiallyDirectedGraph {
 public:
  PartiallyDirectedGraph() = default;
  explicit PartiallyDirectedGraph(int d) : d_(d), marks_(static_cast<std::size_t>(d) * d, EdgeMark::kNone) {}

  int d() const { return d_; }
  // Mark of the pair seen from a: kForward means a -> b.
  EdgeMark mark(int a, int b) const;
  void set_directed(int from, int to);
  void set_undirected(int a, int b);
  void clear(int a, int b);
  int adjacency_count() const;

  friend bool operator==(const PartiallyDirectedGraph&, const PartiallyDirectedGraph&) = default;

 private:
  int d_ = 0;
  std::vector<EdgeMark> marks_;  // stored at (min, max)
};

PartiallyDirectedGraph to_pdag(const Dag& dag);
// CPDAG: compelled edges directed, reversible edges undirected.
PartiallyDirectedGraph essential_graph(const Dag& dag);
// Insertions, deletions and orientation changes; a reversal counts once.
int shd(const PartiallyDirectedGraph& g1, const PartiallyDirectedGraph& g2);

}  // namespace orderspn
