#include "orderspn/reference.hpp"

#include <algorithm>
#include <cmath>

#include "orderspn/math.hpp"

namespace orderspn::reference {
namespace {

template <typename LeafValue>
double lse_pass(const OrderSpn& spn, NodeRef r, LeafValue& leaf_value, bool weighted) {
  if (r.kind == NodeKind::kLeaf) return leaf_value(spn.leaves()[r.index]);
  const SumNode& node = spn.sums()[r.index];
  std::vector<double> terms;
  for (std::uint32_t p = node.first_child; p < node.first_child + node.child_count; ++p) {
    const ProductNode& prod = spn.products()[p];
    const double v = lse_pass(spn, prod.left, leaf_value, weighted) + lse_pass(spn, prod.right, leaf_value, weighted);
    terms.push_back(weighted ? spn.log_weights()[p] + v : v);
  }
  return log_sum_exp(terms);
}

double elbo_node(const OrderSpn& spn, NodeRef r, const ElboState& state, const std::vector<double>& log_phi,
                 double adjoint, std::vector<double>& grad) {
  if (r.kind == NodeKind::kLeaf) return state.leaf_log_c[r.index];
  const SumNode& node = spn.sums()[r.index];
  // Child values first (adjoints are filled in afterwards by a second descent).
  std::vector<double> child(node.child_count);
  for (std::uint32_t k = 0; k < node.child_count; ++k) {
    const ProductNode& prod = spn.products()[node.first_child + k];
    std::vector<double> unused;
    child[k] = elbo_node(spn, prod.left, state, log_phi, 0.0, unused) +
               elbo_node(spn, prod.right, state, log_phi, 0.0, unused);
  }
  double value = 0.0;
  for (std::uint32_t k = 0; k < node.child_count; ++k) {
    const double lp = log_phi[node.first_child + k];
    if (lp != kNegInf) value += std::exp(lp) * (child[k] - lp);
  }
  if (adjoint != 0.0 && !grad.empty()) {
    for (std::uint32_t k = 0; k < node.child_count; ++k) {
      const std::uint32_t p = node.first_child + k;
      const double lp = log_phi[p];
      const double phi = std::exp(lp);
      grad[p] = adjoint * phi * ((lp == kNegInf ? 0.0 : child[k] - lp) - value);
      const ProductNode& prod = spn.products()[p];
      elbo_node(spn, prod.left, state, log_phi, adjoint * phi, grad);
      elbo_node(spn, prod.right, state, log_phi, adjoint * phi, grad);
    }
  }
  return value;
}

// Returns the d x |S2| effect buffer of a node, columns in increasing member order.
Eigen::MatrixXd bce_node(const OrderSpn& spn, NodeRef r, const LeafTable& leaf, const LeafWeightModel& model) {
  const int d = spn.d();
  if (r.kind == NodeKind::kLeaf) {
    const LeafNode& l = spn.leaves()[r.index];
    return model.leaf_effects(leaf, l.s1, l.var);
  }
  const SumNode& node = spn.sums()[r.index];
  const auto block = node.s2.members();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(block.size()));
  for (std::uint32_t p = node.first_child; p < node.first_child + node.child_count; ++p) {
    const ProductNode& prod = spn.products()[p];
    const Eigen::MatrixXd t1 = bce_node(spn, prod.left, leaf, model);
    const Eigen::MatrixXd t2 = bce_node(spn, prod.right, leaf, model);
    const auto first = prod.s21.members();
    const auto second = prod.s22.members();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(block.size()));
    for (std::size_t c = 0; c < block.size(); ++c) {
      const int j = block[c];
      for (int i = 0; i < d; ++i) {
        double v = 0.0;
        const auto a = std::find(first.begin(), first.end(), j);
        if (a != first.end()) {
          if (!prod.s22.contains(i)) v = t1(i, a - first.begin());
        } else {
          const auto b = std::find(second.begin(), second.end(), j) - second.begin();
          v = t2(i, b);
          if (!prod.s22.contains(i))
            for (std::size_t k = 0; k < first.size(); ++k)
              if (first[k] != i) v += t1(i, k) * t2(first[k], b);
        }
        out(i, c) = v;
      }
    }
    acc += std::exp(spn.log_weights()[p]) * out;
  }
  return acc;
}

}  // namespace

double marginal(const OrderSpn& spn, const LeafTable& leaf, const EdgeConjunction& c) {
  auto value = [&](const LeafNode& l) { return leaf.marginal(l.var, l.s1, c.required(l.var), c.forbidden(l.var)); };
  return lse_pass(spn, spn.root(), value, true);
}

double log_mass(const OrderSpn& spn, const LeafTable& leaf) {
  auto value = [&](const LeafNode& l) { return leaf.log_normalizer(l.var, l.s1); };
  return lse_pass(spn, spn.root(), value, false);
}

ElboWithGradient elbo_and_gradient(const OrderSpn& spn, const ElboState& state) {
  const std::vector<double> log_phi = state.log_weights(spn);
  ElboWithGradient out;
  out.gradient.assign(spn.products().size(), 0.0);
  out.value = elbo_node(spn, spn.root(), state, log_phi, 1.0, out.gradient);
  return out;
}

Eigen::MatrixXd bce_matrix(const OrderSpn& spn, const LeafTable& leaf, const LeafWeightModel& model) {
  if (spn.sums().empty()) return Eigen::MatrixXd::Zero(spn.d(), spn.d());
  Eigen::MatrixXd out = bce_node(spn, spn.root(), leaf, model);
  out.diagonal().setZero();
  return out;
}

}  // namespace orderspn::reference
