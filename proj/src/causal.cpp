#include "orderspn/causal.hpp"

#include <bit>
#include <cmath>
#include <exception>

#include "orderspn/error.hpp"
#include "orderspn/threads.hpp"

namespace orderspn {

Eigen::VectorXd FixedWeightModel::leaf_effects(const LeafTable& leaf, ParentSet s1, int i) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(leaf.d());
  for (int j : (s1 & leaf.candidates(i)).members()) {
    if (weights_(j, i) == 0.0) continue;
    out(j) = std::exp(leaf.marginal(i, s1, ParentSet::single(j), ParentSet{})) * weights_(j, i);
  }
  return out;
}

BgePosteriorWeightModel::BgePosteriorWeightModel(const Dataset& data, const BgeParams& params,
                                                 const std::vector<ParentSet>& candidates, BgeWeightOptions options)
    : d_(data.d()), scorer_(data, params), options_(options), candidates_(candidates) {
  if (data.n() < 2) throw ConfigError("bge_posterior_weight_model: needs at least two rows");
  if (static_cast<int>(candidates_.size()) != d_) throw ConfigError("bge_posterior_weight_model: one candidate set per variable");
  if (options_.sample_count < 1) throw ConfigError("bge_posterior_weight_model: sample count must be positive");
  cache_.resize(d_);
  for (int i = 0; i < d_; ++i)
    if (candidates_[i].size() <= 12) cache_[i].resize(std::size_t{1} << candidates_[i].size());

  std::vector<std::pair<int, std::uint32_t>> jobs;
  for (int i = 0; i < d_; ++i)
    for (std::uint32_t local = 0; local < cache_[i].size(); ++local) jobs.emplace_back(i, local);
  std::exception_ptr failure;
  const auto job_count = static_cast<std::int64_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t k = 0; k < job_count; ++k) {
    const auto [i, local] = jobs[k];
    const auto members = candidates_[i].members();
    ParentSet parents;
    for (std::size_t b = 0; b < members.size(); ++b)
      if ((local >> b) & 1U) parents = parents.with(members[b]);
    try {
      cache_[i][local] = coefficients(i, parents);
    } catch (...) {
#pragma omp critical(orderspn_bge_cache)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

Eigen::VectorXd BgePosteriorWeightModel::coefficients(int i, ParentSet parents) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d_);
  if (parents.empty()) return out;
  const Eigen::VectorXd coef = scorer_.posterior_mean_coefficients(i, parents);
  const auto members = parents.members();
  for (std::size_t k = 0; k < members.size(); ++k) out(members[k]) = coef(static_cast<Eigen::Index>(k));
  return out;
}

Eigen::VectorXd BgePosteriorWeightModel::leaf_effects(const LeafTable& leaf, ParentSet s1, int i) const {
  const ParentSet cand = candidates_[i];
  if (leaf.candidates(i) != cand) throw ConfigError("bge_posterior_weight_model: candidate sets differ from the leaf table");
  auto coef = [&](ParentSet g) {
    if (!cache_[i].empty()) {
      std::uint32_t local = 0;
      int b = 0;
      for (int m : cand.members()) {
        if (g.contains(m)) local |= std::uint32_t{1} << b;
        ++b;
      }
      return cache_[i][local];
    }
    return coefficients(i, g);
  };
  const ParentSet allowed = s1 & cand;
  const auto members = allowed.members();
  const int m = static_cast<int>(members.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d_);
  if (m == 0) return out;
  if ((std::uint64_t{1} << m) <= static_cast<std::uint64_t>(options_.exact_limit)) {
    for (std::uint32_t local = 0; local < (std::uint32_t{1} << m); ++local) {
      ParentSet g;
      for (int b = 0; b < m; ++b)
        if ((local >> b) & 1U) g = g.with(members[b]);
      const double p = std::exp(leaf.marginal(i, s1, g, allowed - g));
      if (p > 0) out += p * coef(g);
    }
    return out;
  }
  Rng rng(derive_seed(derive_seed(options_.seed, s1.bits()), static_cast<std::uint64_t>(i)));
  for (int k = 0; k < options_.sample_count; ++k) out += coef(leaf.sample(i, s1, ParentSet{}, ParentSet{}, rng));
  return out / options_.sample_count;
}

std::unique_ptr<LeafWeightModel> fixed_weight_model(Eigen::MatrixXd weights) {
  return std::make_unique<FixedWeightModel>(std::move(weights));
}

std::unique_ptr<LeafWeightModel> bge_posterior_weight_model(const Dataset& data, const BgeParams& params,
                                                            const std::vector<ParentSet>& candidates,
                                                            BgeWeightOptions options) {
  return std::make_unique<BgePosteriorWeightModel>(data, params, candidates, options);
}

namespace {

// Column of variable v inside a node buffer whose columns are the members of s2.
int column_of(ParentSet s2, int v) {
  return std::popcount(s2.bits() & ((std::uint64_t{1} << v) - 1));
}

}  // namespace

Eigen::MatrixXd bce_matrix(const OrderSpn& spn, const LeafTable& leaf, const LeafWeightModel& model,
                           PassCounters* counters) {
  const int d = spn.d();
  if (leaf.d() != d) throw ConfigError("bce_matrix: leaf table and circuit disagree on d");
  // Buffers are d x |S2|: rows are global variables, columns the block's members.
  std::vector<Eigen::MatrixXd> leaf_buf(spn.leaves().size());
  std::exception_ptr failure;
  const auto leaf_count = static_cast<std::int64_t>(spn.leaves().size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t k = 0; k < leaf_count; ++k) {
    try {
      const LeafNode& l = spn.leaves()[k];
      leaf_buf[k] = model.leaf_effects(leaf, l.s1, l.var);
    } catch (...) {
#pragma omp critical(orderspn_bce_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  if (spn.sums().empty()) return Eigen::MatrixXd::Zero(d, d);

  std::vector<Eigen::MatrixXd> sum_buf(spn.sums().size());
  auto buffer = [&](NodeRef r) -> const Eigen::MatrixXd& {
    return r.kind == NodeKind::kSum ? sum_buf[r.index] : leaf_buf[r.index];
  };
  std::uint64_t multiply_adds = 0;
  for (int j = spn.sum_layer_count() - 1; j >= 0; --j) {
    const IndexRange sums = spn.sum_layer(j);
#pragma omp parallel for schedule(dynamic, 4) reduction(+ : multiply_adds)
    for (std::int64_t s = sums.begin; s < static_cast<std::int64_t>(sums.end); ++s) {
      const SumNode& node = spn.sums()[s];
      const int width = node.s2.size();
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, width);
      Eigen::MatrixXd prod(d, width);
      const auto log_w = spn.child_log_weights(static_cast<std::uint32_t>(s));
      for (std::uint32_t c = 0; c < node.child_count; ++c) {
        const double w = std::exp(log_w[c]);
        if (w == 0.0) continue;
        const ProductNode& p = spn.products()[node.first_child + c];
        const Eigen::MatrixXd& left = buffer(p.left);
        const Eigen::MatrixXd& right = buffer(p.right);
        const auto first = p.s21.members();
        const auto second = p.s22.members();
        for (std::size_t a = 0; a < first.size(); ++a) prod.col(column_of(node.s2, first[a])) = left.col(a);
        for (std::size_t b = 0; b < second.size(); ++b) {
          auto col = prod.col(column_of(node.s2, second[b]));
          col = right.col(b);
          // Paths that leave the first block through its last member k.
          for (std::size_t a = 0; a < first.size(); ++a) {
            const double via = right(first[a], b);
            if (via != 0.0) col += via * left.col(a);
          }
        }
        acc += w * prod;
        multiply_adds += static_cast<std::uint64_t>(p.s1.size() + p.s21.size()) * p.s21.size() * p.s22.size();
      }
      sum_buf[s] = std::move(acc);
    }
    // Children of this layer are no longer needed.
    for (std::uint32_t p = spn.product_layer(j).begin; p < spn.product_layer(j).end; ++p) {
      for (NodeRef r : {spn.products()[p].left, spn.products()[p].right}) {
        if (r.kind == NodeKind::kSum)
          sum_buf[r.index] = Eigen::MatrixXd();
        else
          leaf_buf[r.index] = Eigen::MatrixXd();
      }
    }
  }
  if (counters) counters->multiply_adds += multiply_adds;
  Eigen::MatrixXd out = sum_buf[0];
  out.diagonal().setZero();
  return out;
}

}  // namespace orderspn
