#pragma once

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "orderspn/circuit.hpp"
#include "orderspn/score.hpp"

namespace testing {

// The circuit's distribution written out in full: every (order, graph) with its
// log q, built by walking the node tree and enumerating parent sets from the raw
// score table. Shares nothing with the passes under test.
struct Joint {
  struct Term {
    std::vector<int> order;
    Dag dag;
    double log_q;
    double log_target;  // sum_i log pi_i(G_i)
  };
  std::vector<Term> terms;
};

namespace detail {

inline void expand_orders(const OrderSpn& spn, NodeRef node, std::vector<std::pair<std::vector<int>, double>>& out) {
  if (node.kind == NodeKind::kLeaf) {
    out.push_back({{spn.leaves()[node.index].var}, 0.0});
    return;
  }
  if (node.kind == NodeKind::kProduct) {
    const ProductNode& p = spn.products()[node.index];
    std::vector<std::pair<std::vector<int>, double>> left, right;
    expand_orders(spn, p.left, left);
    expand_orders(spn, p.right, right);
    for (const auto& [lo, lw] : left)
      for (const auto& [ro, rw] : right) {
        auto o = lo;
        o.insert(o.end(), ro.begin(), ro.end());
        out.push_back({o, lw + rw});
      }
    return;
  }
  const SumNode& s = spn.sums()[node.index];
  for (std::uint32_t k = 0; k < s.child_count; ++k) {
    std::vector<std::pair<std::vector<int>, double>> sub;
    expand_orders(spn, NodeRef{NodeKind::kProduct, s.first_child + k}, sub);
    for (auto& [o, w] : sub) out.push_back({o, w + spn.log_weights()[s.first_child + k]});
  }
}

}  // namespace detail

inline Joint expand_joint(const OrderSpn& spn, const LocalScoreTable& scores) {
  const int d = spn.d();
  std::vector<std::pair<std::vector<int>, double>> orders;
  detail::expand_orders(spn, spn.root(), orders);
  Joint joint;
  for (const auto& [perm, log_w] : orders) {
    // Allowed parent sets and their normalised probabilities, per variable.
    std::vector<std::vector<std::pair<ParentSet, double>>> options(d);
    ParentSet before;
    for (int v : perm) {
      std::vector<std::pair<ParentSet, double>> opts;
      double norm = -std::numeric_limits<double>::infinity();
      for (std::uint32_t local = 0; local < scores.log_scores(v).size(); ++local) {
        const ParentSet g = scores.global_mask(v, local);
        if (!g.subset_of(before)) continue;
        opts.push_back({g, scores.log_scores(v)[local]});
        const double a = std::max(norm, opts.back().second);
        norm = a + std::log(std::exp(norm - a) + std::exp(opts.back().second - a));
      }
      for (auto& o : opts) o.second -= norm;
      options[v] = opts;
      before = before.with(v);
    }
    std::vector<std::size_t> pick(d, 0);
    while (true) {
      Dag g(d);
      double lq = log_w, lt = 0;
      for (int v = 0; v < d; ++v) {
        g.set_parents(v, options[v][pick[v]].first);
        lq += options[v][pick[v]].second;
        lt += scores.log_score(v, options[v][pick[v]].first);
      }
      joint.terms.push_back({perm, g, lq, lt});
      int v = 0;
      while (v < d && ++pick[v] == options[v].size()) pick[v++] = 0;
      if (v == d) break;
    }
  }
  return joint;
}

inline double joint_log_prob(const Joint& j, const EdgeConjunction& c) {
  double total = 0;
  for (const auto& t : j.terms)
    if (c.satisfied_by(t.dag)) total += std::exp(t.log_q);
  return std::log(total);
}

}  // namespace testing
