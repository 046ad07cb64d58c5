#pragma once

#include <cstdint>
#include <vector>

#include "orderspn/circuit.hpp"
#include "orderspn/leaf.hpp"

namespace orderspn {

// Work counters for complexity checks. Integer sums, so they stay deterministic
// under parallel reduction.
struct PassCounters {
  std::uint64_t edge_visits = 0;
  std::uint64_t leaf_evaluations = 0;
  std::uint64_t multiply_adds = 0;

  PassCounters& operator+=(const PassCounters& o) {
    edge_visits += o.edge_visits;
    leaf_evaluations += o.leaf_evaluations;
    multiply_adds += o.multiply_adds;
    return *this;
  }
};

// Log-values of every node after one bottom-up pass.
struct NodeValues {
  std::vector<double> sums;
  std::vector<double> products;
  std::vector<double> leaves;

  double at(NodeRef r) const;
  double root(const OrderSpn& spn) const { return at(spn.root()); }
};

// log q(c) at every node: leaves use the leaf marginal, products add, sums log-sum-exp.
NodeValues evidence_pass(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c,
                         PassCounters* counters = nullptr);

double marginal(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c, PassCounters* counters = nullptr);

// log q(c | given); -inf when c contradicts given. Throws InfeasibleError when q(given) = 0.
double conditional(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c, const EdgeConjunction& given);

struct MpeResult {
  double log_prob = kNegInf;  // max over (order, graph) of log q(order, graph | given)
  Order order;
  Dag dag;
};

// Max pass plus top-down decode. Sum ties go to the earlier child. Throws
// InfeasibleError when q(given) = 0.
MpeResult mpe(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& given,
              PassCounters* counters = nullptr);

struct StructureSample {
  Order order;
  Dag dag;
};

StructureSample sample(const OrderSpn& spn, const LeafTable& leaf, Rng& rng);
StructureSample conditional_sample(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& given, Rng& rng);
// Same law as conditional_sample, reusing an evidence pass already computed for `given`.
StructureSample conditional_sample(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& given,
                                   const NodeValues& evidence, Rng& rng);

// `count` independent draws, each from its own seeded stream; parallel and
// deterministic in (seed, count).
std::vector<StructureSample> sample_many(const OrderSpn& spn, const LeafTable& leaf, int count, std::uint64_t seed,
                                         const EdgeConjunction* given = nullptr);

// (j, i) = q(j -> i), one marginal pass per ordered pair.
Eigen::MatrixXd edge_marginals(const OrderSpn& spn, const LeafTable& leaf);

// Unnormalised target mass under the circuit's support:
// log sum over supported orders sigma of prod_i tau_i(sigma^{<i} ∩ C_i). Weights are ignored.
NodeValues mass_pass(const OrderSpn& spn, const LeafTable& leaf);
double log_mass(const OrderSpn& spn, const LeafTable& leaf);

// Weights proportional to child masses: q becomes the target restricted to the support.
void set_posterior_weights(OrderSpn& spn, const LeafTable& leaf);

}  // namespace orderspn
