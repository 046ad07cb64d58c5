#include "orderspn/leaf.hpp"

#include <cmath>
#include <string>

#include "orderspn/error.hpp"

namespace orderspn {

EdgeConjunction& EdgeConjunction::add(int child, int parent, bool present) {
  if (child < 0 || child >= d() || parent < 0 || parent >= d()) throw ConfigError("EdgeConjunction: index out of range");
  if (child == parent) throw ConfigError("EdgeConjunction: self-loop literal");
  if (present) {
    if (forbidden_[child].contains(parent)) throw ConfigError("EdgeConjunction: contradictory literal");
    required_[child] = required_[child].with(parent);
  } else {
    if (required_[child].contains(parent)) throw ConfigError("EdgeConjunction: contradictory literal");
    forbidden_[child] = forbidden_[child].with(parent);
  }
  return *this;
}

bool EdgeConjunction::empty() const { return literal_count() == 0; }

int EdgeConjunction::literal_count() const {
  int n = 0;
  for (int i = 0; i < d(); ++i) n += required_[i].size() + forbidden_[i].size();
  return n;
}

bool EdgeConjunction::satisfied_by(const Dag& dag) const {
  for (int i = 0; i < d(); ++i) {
    if (!required_[i].subset_of(dag.parents(i))) return false;
    if (forbidden_[i].intersects(dag.parents(i))) return false;
  }
  return true;
}

std::optional<EdgeConjunction> EdgeConjunction::conjoin(const EdgeConjunction& a, const EdgeConjunction& b) {
  if (a.d() != b.d()) throw ConfigError("EdgeConjunction: dimension mismatch");
  EdgeConjunction out(a.d());
  for (int i = 0; i < a.d(); ++i) {
    out.required_[i] = a.required_[i] | b.required_[i];
    out.forbidden_[i] = a.forbidden_[i] | b.forbidden_[i];
    if (out.required_[i].intersects(out.forbidden_[i])) return std::nullopt;
  }
  return out;
}

EdgeConjunction EdgeConjunction::full(const Dag& dag) {
  EdgeConjunction out(dag.d());
  const ParentSet all = ParentSet::all(dag.d());
  for (int i = 0; i < dag.d(); ++i) {
    out.required_[i] = dag.parents(i);
    out.forbidden_[i] = all.without(i) - dag.parents(i);
  }
  return out;
}

LeafTable::VariableTable LeafTable::build_variable(const LocalScoreTable& scores, int i) {
  VariableTable t;
  t.candidates = scores.candidates(i);
  t.members = scores.candidate_members(i);
  const int k = static_cast<int>(t.members.size());
  const std::uint32_t subsets = std::uint32_t{1} << k;

  std::vector<std::uint32_t> pow3(k + 1, 1);
  for (int p = 1; p <= k; ++p) pow3[p] = 3 * pow3[p - 1];
  t.ternary.assign(subsets, 0);
  for (std::uint32_t m = 1; m < subsets; ++m) {
    const int low = std::countr_zero(m);
    t.ternary[m] = t.ternary[m & (m - 1)] + pow3[low];
  }

  const std::uint32_t cells = pow3[k];
  t.sum.assign(cells, 0.0);
  t.max.assign(cells, 0.0);
  t.argmax.assign(cells, 0);
  const auto base = scores.log_scores(i);
  // Cells reached by the recurrence have strictly larger keys, so sweep downwards.
  for (std::int64_t key = static_cast<std::int64_t>(cells) - 1; key >= 0; --key) {
    std::uint32_t rest = static_cast<std::uint32_t>(key);
    std::uint32_t required = 0;
    int free_pos = -1;
    for (int p = 0; p < k; ++p) {
      const std::uint32_t digit = rest % 3;
      rest /= 3;
      if (digit == 1)
        required |= std::uint32_t{1} << p;
      else if (digit == 0 && free_pos < 0)
        free_pos = p;
    }
    if (free_pos < 0) {
      t.sum[key] = base[required];
      t.max[key] = base[required];
      t.argmax[key] = required;
      continue;
    }
    const std::size_t with_b = key + pow3[free_pos];
    const std::size_t without_b = key + 2 * pow3[free_pos];
    t.sum[key] = log_add(t.sum[with_b], t.sum[without_b]);
    const double a = t.max[with_b];
    const double b = t.max[without_b];
    const bool take_with = a > b || (a == b && t.argmax[with_b] < t.argmax[without_b]);
    t.max[key] = take_with ? a : b;
    t.argmax[key] = take_with ? t.argmax[with_b] : t.argmax[without_b];
  }
  return t;
}

LeafTable::LeafTable(const LocalScoreTable& scores, int candidate_cap) {
  const int d = scores.d();
  for (int i = 0; i < d; ++i)
    if (scores.candidates(i).size() > candidate_cap || scores.candidates(i).size() > 20)
      throw ConfigError("LeafTable: |C_" + std::to_string(i) + "| exceeds cap " + std::to_string(candidate_cap));
  vars_.resize(d);
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < d; ++i) vars_[i] = build_variable(scores, i);
}

std::uint32_t LeafTable::local_mask(int i, ParentSet global) const {
  std::uint32_t out = 0;
  const auto& m = vars_[i].members;
  for (std::size_t k = 0; k < m.size(); ++k)
    if (global.contains(m[k])) out |= std::uint32_t{1} << k;
  return out;
}

ParentSet LeafTable::global_mask(int i, std::uint32_t local) const {
  ParentSet out;
  const auto& m = vars_[i].members;
  for (std::size_t k = 0; k < m.size(); ++k)
    if ((local >> k) & 1U) out = out.with(m[k]);
  return out;
}

double LeafTable::log_normalizer(int i, ParentSet s1) const {
  const std::uint32_t outside = local_mask(i, vars_[i].candidates - s1);
  return vars_[i].sum[key(i, 0, outside)];
}

double LeafTable::marginal(int i, ParentSet s1, ParentSet required, ParentSet forbidden) const {
  const ParentSet allowed = s1 & vars_[i].candidates;
  if (!required.subset_of(allowed)) return kNegInf;
  const std::uint32_t outside = local_mask(i, vars_[i].candidates - s1);
  const std::uint32_t req = local_mask(i, required);
  const std::uint32_t forb = local_mask(i, forbidden) | outside;
  return vars_[i].sum[key(i, req, forb)] - vars_[i].sum[key(i, 0, outside)];
}

LeafMpe LeafTable::mpe(int i, ParentSet s1, ParentSet required, ParentSet forbidden) const {
  const ParentSet allowed = s1 & vars_[i].candidates;
  if (!required.subset_of(allowed)) return {};
  const std::uint32_t outside = local_mask(i, vars_[i].candidates - s1);
  const std::uint32_t k = key(i, local_mask(i, required), local_mask(i, forbidden) | outside);
  return {vars_[i].max[k] - vars_[i].sum[key(i, 0, outside)], global_mask(i, vars_[i].argmax[k])};
}

ParentSet LeafTable::sample(int i, ParentSet s1, ParentSet required, ParentSet forbidden, Rng& rng) const {
  const ParentSet allowed = s1 & vars_[i].candidates;
  if (!required.subset_of(allowed)) throw InfeasibleError("leaf_sample: required parent outside the leaf's support");
  std::uint32_t req = local_mask(i, required);
  std::uint32_t forb = local_mask(i, forbidden) | local_mask(i, vars_[i].candidates - s1);
  double current = vars_[i].sum[key(i, req, forb)];
  if (current == kNegInf) throw InfeasibleError("leaf_sample: infeasible condition");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int k = candidate_count(i);
  for (int p = 0; p < k; ++p) {
    const std::uint32_t bit = std::uint32_t{1} << p;
    if ((req | forb) & bit) continue;
    const double with_p = vars_[i].sum[key(i, req | bit, forb)];
    if (unit(rng) < std::exp(with_p - current)) {
      req |= bit;
      current = with_p;
    } else {
      forb |= bit;
      current = vars_[i].sum[key(i, req, forb)];
    }
  }
  return global_mask(i, req);
}

double leaf_marginal(const LeafTable& table, int i, ParentSet s1, const EdgeConjunction& c) {
  return table.marginal(i, s1, c.required(i), c.forbidden(i));
}

LeafMpe leaf_mpe(const LeafTable& table, int i, ParentSet s1, const EdgeConjunction& c) {
  return table.mpe(i, s1, c.required(i), c.forbidden(i));
}

ParentSet leaf_sample(const LeafTable& table, int i, ParentSet s1, const EdgeConjunction& c, Rng& rng) {
  return table.sample(i, s1, c.required(i), c.forbidden(i), rng);
}

}  // namespace orderspn
