#pragma once

#include <cstdint>
#include <span>

#include "orderspn/circuit.hpp"
#include "orderspn/infer.hpp"

namespace orderspn::detail {

// Layer-by-layer bottom-up pass. Products add their children's values; each sum
// reduces the values of its product children with `sum_value(sum_index, children)`.
template <typename LeafValue, typename SumValue>
NodeValues bottom_up(const OrderSpn& spn, LeafValue&& leaf_value, SumValue&& sum_value, PassCounters* counters) {
  NodeValues v;
  v.leaves.resize(spn.leaves().size());
  v.products.resize(spn.products().size());
  v.sums.resize(spn.sums().size());
  const auto leaf_count = static_cast<std::int64_t>(spn.leaves().size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < leaf_count; ++k) v.leaves[k] = leaf_value(static_cast<std::uint32_t>(k));

  std::uint64_t edges = 0;
  for (int j = spn.sum_layer_count() - 1; j >= 0; --j) {
    const IndexRange prods = spn.product_layer(j);
#pragma omp parallel for schedule(static)
    for (std::int64_t p = prods.begin; p < static_cast<std::int64_t>(prods.end); ++p) {
      const ProductNode& node = spn.products()[p];
      v.products[p] = v.at(node.left) + v.at(node.right);
    }
    const IndexRange sums = spn.sum_layer(j);
#pragma omp parallel for schedule(static)
    for (std::int64_t s = sums.begin; s < static_cast<std::int64_t>(sums.end); ++s) {
      const SumNode& node = spn.sums()[s];
      v.sums[s] = sum_value(static_cast<std::uint32_t>(s),
                            std::span<const double>(v.products).subspan(node.first_child, node.child_count));
    }
    edges += 2ULL * prods.size();
    for (std::uint32_t s = sums.begin; s < sums.end; ++s) edges += spn.sums()[s].child_count;
  }
  if (counters) {
    counters->edge_visits += edges;
    counters->leaf_evaluations += spn.leaves().size();
  }
  return v;
}

}  // namespace orderspn::detail
