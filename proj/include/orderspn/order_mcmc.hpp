#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "orderspn/circuit.hpp"
#include "orderspn/leaf.hpp"

namespace orderspn {

// Metropolis-Hastings over orders of a block S2 placed after S1, scored by
// sum_{i in S2} log tau_i((S1 ∪ sigma^{<i}) ∩ C_i). Proposals mix adjacent
// transpositions and uniform random swaps (both symmetric).
class OrderMcmcOracle : public PartitionOracle {
 public:
  // budget = chain length; the first quarter is discarded as burn-in.
  OrderMcmcOracle(const LeafTable& leaf, int budget);

  int budget() const { return budget_; }

  // Most frequently visited half-splits, ties by first visit; padded with random
  // distinct splits when the chain visits fewer than `count`.
  std::vector<Partition> propose(ParentSet s1, ParentSet s2, int count, std::uint64_t seed) const override;

  // `count` orders of s2 spread evenly over the post-burn-in part of one chain.
  std::vector<std::vector<int>> sample_orders(ParentSet s1, ParentSet s2, int count, std::uint64_t seed) const;

  double order_log_score(ParentSet s1, const std::vector<int>& order) const;

 private:
  template <typename Visit>
  void run_chain(ParentSet s1, ParentSet s2, std::uint64_t seed, Visit&& visit) const;

  const LeafTable* leaf_;
  int budget_;
};

std::unique_ptr<OrderMcmcOracle> builtin_order_mcmc_oracle(const LeafTable& leaf, int budget);

}  // namespace orderspn
