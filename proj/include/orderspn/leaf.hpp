#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "orderspn/math.hpp"
#include "orderspn/model.hpp"
#include "orderspn/score.hpp"

namespace orderspn {

using Rng = std::mt19937_64;

// Conjunction of edge literals a_{i,j} / not a_{i,j}, stored per child as masks of
// required and forbidden parents.
class EdgeConjunction {
 public:
  EdgeConjunction() = default;
  explicit EdgeConjunction(int d) : required_(d), forbidden_(d) {}

  int d() const { return static_cast<int>(required_.size()); }
  ParentSet required(int child) const { return required_[child]; }
  ParentSet forbidden(int child) const { return forbidden_[child]; }

  // Throws ConfigError on a self-loop or a literal contradicting an existing one.
  EdgeConjunction& add(int child, int parent, bool present);
  EdgeConjunction& require(int parent, int child) { return add(child, parent, true); }
  EdgeConjunction& forbid(int parent, int child) { return add(child, parent, false); }

  bool empty() const;
  int literal_count() const;
  bool satisfied_by(const Dag& dag) const;

  // nullopt when the two conjunctions contradict each other.
  static std::optional<EdgeConjunction> conjoin(const EdgeConjunction& a, const EdgeConjunction& b);
  // Every ordered pair fixed to match `dag`.
  static EdgeConjunction full(const Dag& dag);

 private:
  std::vector<ParentSet> required_;
  std::vector<ParentSet> forbidden_;
};

struct LeafMpe {
  double log_prob = kNegInf;
  ParentSet parents;
};

// Per-variable tables over disjoint pairs (A, A') of C_i, keyed in base 3 with one
// digit per candidate: 0 = free, 1 = in A (required), 2 = in A' (forbidden).
//   sum(A, A')  = log sum of pi_i(G) over G with A in G, A' disjoint from G
//   max(A, A')  = log max of the same, argmax = attaining G (smallest mask on ties)
class LeafTable {
 public:
  LeafTable() = default;
  explicit LeafTable(const LocalScoreTable& scores, int candidate_cap = kDefaultCandidateCap);

  int d() const { return static_cast<int>(vars_.size()); }
  ParentSet candidates(int i) const { return vars_[i].candidates; }
  int candidate_count(int i) const { return static_cast<int>(vars_[i].members.size()); }

  // Raw cells addressed by local masks (bit k = k-th candidate).
  std::uint32_t key(int i, std::uint32_t required_local, std::uint32_t forbidden_local) const {
    const auto& t = vars_[i].ternary;
    return t[required_local] + 2 * t[forbidden_local];
  }
  double sum_cell(int i, std::uint32_t key) const { return vars_[i].sum[key]; }
  double max_cell(int i, std::uint32_t key) const { return vars_[i].max[key]; }
  std::uint32_t argmax_cell(int i, std::uint32_t key) const { return vars_[i].argmax[key]; }
  std::uint32_t local_mask(int i, ParentSet global) const;
  ParentSet global_mask(int i, std::uint32_t local) const;

  // log tau_i(S1 ∩ C_i); also the leaf's ELBO constant.
  double log_normalizer(int i, ParentSet s1) const;
  double marginal(int i, ParentSet s1, ParentSet required, ParentSet forbidden) const;
  // Unconditional leaf log-probability of the best G_i satisfying the literals.
  LeafMpe mpe(int i, ParentSet s1, ParentSet required, ParentSet forbidden) const;
  // Exact draw from the leaf distribution conditioned on the literals.
  ParentSet sample(int i, ParentSet s1, ParentSet required, ParentSet forbidden, Rng& rng) const;

 private:
  struct VariableTable {
    ParentSet candidates;
    std::vector<int> members;
    std::vector<std::uint32_t> ternary;  // ternary[mask] = sum of 3^k over bits k of mask
    std::vector<double> sum;
    std::vector<double> max;
    std::vector<std::uint32_t> argmax;
  };
  static VariableTable build_variable(const LocalScoreTable& scores, int i);

  std::vector<VariableTable> vars_;
};

inline LeafTable build_leaf_table(const LocalScoreTable& scores, int candidate_cap = kDefaultCandidateCap) {
  return LeafTable(scores, candidate_cap);
}

double leaf_marginal(const LeafTable& table, int i, ParentSet s1, const EdgeConjunction& c);
LeafMpe leaf_mpe(const LeafTable& table, int i, ParentSet s1, const EdgeConjunction& c);
ParentSet leaf_sample(const LeafTable& table, int i, ParentSet s1, const EdgeConjunction& c, Rng& rng);

}  // namespace orderspn
