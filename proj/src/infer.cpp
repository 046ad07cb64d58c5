#include "orderspn/infer.hpp"

#include <algorithm>
#include <cmath>

#include "detail/sweep.hpp"
#include "orderspn/error.hpp"
#include "orderspn/math.hpp"
#include "orderspn/threads.hpp"

namespace orderspn {

double NodeValues::at(NodeRef r) const {
  switch (r.kind) {
    case NodeKind::kSum: return sums[r.index];
    case NodeKind::kProduct: return products[r.index];
    case NodeKind::kLeaf: return leaves[r.index];
  }
  return kNegInf;
}

namespace {

void check_dims(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c) {
  if (leaf.d() != spn.d()) throw ConfigError("inference: leaf table and circuit disagree on d");
  if (c.d() != spn.d()) throw ConfigError("inference: conjunction has wrong dimension");
}

// Weighted log-sum-exp over a sum node's children.
double weighted_lse(std::span<const double> log_w, std::span<const double> child) {
  double top = kNegInf;
  for (std::size_t k = 0; k < child.size(); ++k) top = std::max(top, log_w[k] + child[k]);
  if (top == kNegInf) return kNegInf;
  double acc = 0.0;
  for (std::size_t k = 0; k < child.size(); ++k) acc += std::exp(log_w[k] + child[k] - top);
  return top + std::log(acc);
}

std::size_t pick(std::span<const double> log_p, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < log_p.size(); ++k) {
    if (log_p[k] == kNegInf) continue;
    acc += std::exp(log_p[k]);
    last = k;
    if (u < acc) return k;
  }
  return last;
}

// Top-down traversal; `choose(sum)` returns the chosen product index and
// `at_leaf(leaf_index)` returns the leaf's parent set. Leaves are met in order.
template <typename Choose, typename AtLeaf>
std::pair<Order, Dag> descend(const OrderSpn& spn, Choose&& choose, AtLeaf&& at_leaf) {
  std::vector<int> perm;
  Dag dag(spn.d());
  std::vector<NodeRef> stack{spn.root()};
  while (!stack.empty()) {
    const NodeRef r = stack.back();
    stack.pop_back();
    if (r.kind == NodeKind::kLeaf) {
      const LeafNode& l = spn.leaves()[r.index];
      perm.push_back(l.var);
      dag.set_parents(l.var, at_leaf(r.index));
      continue;
    }
    const ProductNode& p = spn.products()[choose(r.index)];
    stack.push_back(p.right);
    stack.push_back(p.left);
  }
  return {Order(std::move(perm)), std::move(dag)};
}

}  // namespace

NodeValues evidence_pass(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c, PassCounters* counters) {
  check_dims(spn, leaf, c);
  return detail::bottom_up(
      spn,
      [&](std::uint32_t k) {
        const LeafNode& l = spn.leaves()[k];
        return leaf.marginal(l.var, l.s1, c.required(l.var), c.forbidden(l.var));
      },
      [&](std::uint32_t s, std::span<const double> child) { return weighted_lse(spn.child_log_weights(s), child); },
      counters);
}

double marginal(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c, PassCounters* counters) {
  return evidence_pass(spn, leaf, c, counters).root(spn);
}

double conditional(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c, const EdgeConjunction& given) {
  const double denom = marginal(spn, leaf, given);
  if (denom == kNegInf) throw InfeasibleError("conditional: the condition has probability zero");
  const auto joint = EdgeConjunction::conjoin(c, given);
  if (!joint) return kNegInf;
  return std::min(0.0, marginal(spn, leaf, *joint) - denom);
}

MpeResult mpe(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& given, PassCounters* counters) {
  check_dims(spn, leaf, given);
  std::vector<LeafMpe> best(spn.leaves().size());
  std::vector<std::uint32_t> choice(spn.sums().size(), 0);
  const NodeValues v = detail::bottom_up(
      spn,
      [&](std::uint32_t k) {
        const LeafNode& l = spn.leaves()[k];
        best[k] = leaf.mpe(l.var, l.s1, given.required(l.var), given.forbidden(l.var));
        return best[k].log_prob;
      },
      [&](std::uint32_t s, std::span<const double> child) {
        const auto w = spn.child_log_weights(s);
        double top = kNegInf;
        std::uint32_t arg = 0;
        for (std::uint32_t k = 0; k < child.size(); ++k)
          if (w[k] + child[k] > top) {
            top = w[k] + child[k];
            arg = k;
          }
        choice[s] = spn.sums()[s].first_child + arg;
        return top;
      },
      counters);
  const double top = v.root(spn);
  if (top == kNegInf) throw InfeasibleError("mpe: the evidence has probability zero");
  const double norm = marginal(spn, leaf, given);
  auto [order, dag] = descend(
      spn, [&](std::uint32_t s) { return choice[s]; }, [&](std::uint32_t k) { return best[k].parents; });
  return {std::min(0.0, top - norm), std::move(order), std::move(dag)};
}

StructureSample sample(const OrderSpn& spn, const LeafTable& leaf, Rng& rng) {
  if (leaf.d() != spn.d()) throw ConfigError("sample: leaf table and circuit disagree on d");
  auto [order, dag] = descend(
      spn,
      [&](std::uint32_t s) { return spn.sums()[s].first_child + pick(spn.child_log_weights(s), rng); },
      [&](std::uint32_t k) {
        const LeafNode& l = spn.leaves()[k];
        return leaf.sample(l.var, l.s1, ParentSet{}, ParentSet{}, rng);
      });
  return {std::move(order), std::move(dag)};
}

StructureSample conditional_sample(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& given,
                                   const NodeValues& evidence, Rng& rng) {
  if (evidence.root(spn) == kNegInf) throw InfeasibleError("conditional_sample: the condition has probability zero");
  std::vector<double> scratch;
  auto [order, dag] = descend(
      spn,
      [&](std::uint32_t s) {
        const SumNode& node = spn.sums()[s];
        const auto w = spn.child_log_weights(s);
        scratch.resize(node.child_count);
        for (std::uint32_t k = 0; k < node.child_count; ++k)
          scratch[k] = w[k] + evidence.products[node.first_child + k] - evidence.sums[s];
        return node.first_child + pick(scratch, rng);
      },
      [&](std::uint32_t k) {
        const LeafNode& l = spn.leaves()[k];
        return leaf.sample(l.var, l.s1, given.required(l.var), given.forbidden(l.var), rng);
      });
  return {std::move(order), std::move(dag)};
}

StructureSample conditional_sample(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& given, Rng& rng) {
  return conditional_sample(spn, leaf, given, evidence_pass(spn, leaf, given), rng);
}

std::vector<StructureSample> sample_many(const OrderSpn& spn, const LeafTable& leaf, int count, std::uint64_t seed,
                                         const EdgeConjunction* given) {
  if (count < 0) throw ConfigError("sample_many: negative count");
  std::vector<StructureSample> out(count);
  NodeValues evidence;
  if (given) evidence = evidence_pass(spn, leaf, *given);
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < count; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    out[k] = given ? conditional_sample(spn, leaf, *given, evidence, rng) : sample(spn, leaf, rng);
  }
  return out;
}

Eigen::MatrixXd edge_marginals(const OrderSpn& spn, const LeafTable& leaf) {
  const int d = spn.d();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  // Each pass is itself parallel over nodes, so pairs run one after another.
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      EdgeConjunction c(d);
      c.require(j, i);
      out(j, i) = std::exp(marginal(spn, leaf, c));
    }
  return out;
}

NodeValues mass_pass(const OrderSpn& spn, const LeafTable& leaf) {
  if (leaf.d() != spn.d()) throw ConfigError("log_mass: leaf table and circuit disagree on d");
  return detail::bottom_up(
      spn,
      [&](std::uint32_t k) { return leaf.log_normalizer(spn.leaves()[k].var, spn.leaves()[k].s1); },
      [](std::uint32_t, std::span<const double> child) { return log_sum_exp(child); }, nullptr);
}

double log_mass(const OrderSpn& spn, const LeafTable& leaf) { return mass_pass(spn, leaf).root(spn); }

void set_posterior_weights(OrderSpn& spn, const LeafTable& leaf) {
  const NodeValues v = mass_pass(spn, leaf);
  std::vector<double> w(spn.products().size());
  for (std::uint32_t s = 0; s < spn.sums().size(); ++s) {
    const SumNode& node = spn.sums()[s];
    for (std::uint32_t k = node.first_child; k < node.first_child + node.child_count; ++k)
      w[k] = v.products[k] - v.sums[s];
  }
  spn.set_log_weights(std::move(w));
}

}  // namespace orderspn
