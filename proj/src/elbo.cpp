#include "orderspn/elbo.hpp"

#include <cmath>
#include <string>

#include "detail/sweep.hpp"
#include "orderspn/error.hpp"
#include "orderspn/math.hpp"

namespace orderspn {

ElboState ElboState::init(const OrderSpn& spn, const LeafTable& leaf) {
  if (leaf.d() != spn.d()) throw ConfigError("ElboState: leaf table and circuit disagree on d");
  ElboState s;
  s.theta.assign(spn.log_weights().begin(), spn.log_weights().end());
  s.leaf_log_c.resize(spn.leaves().size());
  for (std::size_t k = 0; k < spn.leaves().size(); ++k)
    s.leaf_log_c[k] = leaf.log_normalizer(spn.leaves()[k].var, spn.leaves()[k].s1);
  return s;
}

std::vector<double> ElboState::log_weights(const OrderSpn& spn) const {
  if (theta.size() != spn.products().size()) throw ConfigError("ElboState: theta has wrong length");
  std::vector<double> out(theta.size());
  const auto sum_count = static_cast<std::int64_t>(spn.sums().size());
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < sum_count; ++s) {
    const SumNode& node = spn.sums()[s];
    const auto slice = std::span<const double>(theta).subspan(node.first_child, node.child_count);
    const double norm = log_sum_exp(slice);
    for (std::uint32_t k = 0; k < node.child_count; ++k) out[node.first_child + k] = slice[k] - norm;
  }
  return out;
}

void ElboState::write_weights(OrderSpn& spn) const { spn.set_log_weights(log_weights(spn)); }

namespace {

NodeValues elbo_pass(const OrderSpn& spn, const ElboState& state, const std::vector<double>& log_phi,
                     PassCounters* counters) {
  if (state.leaf_log_c.size() != spn.leaves().size()) throw ConfigError("ElboState: leaf constants have wrong length");
  return detail::bottom_up(
      spn, [&](std::uint32_t k) { return state.leaf_log_c[k]; },
      [&](std::uint32_t s, std::span<const double> child) {
        const std::uint32_t first = spn.sums()[s].first_child;
        double acc = 0.0;
        for (std::size_t k = 0; k < child.size(); ++k) {
          const double lp = log_phi[first + k];
          if (lp == kNegInf) continue;
          acc += std::exp(lp) * (child[k] - lp);
        }
        return acc;
      },
      counters);
}

}  // namespace

double elbo(const OrderSpn& spn, const ElboState& state, PassCounters* counters) {
  return elbo_pass(spn, state, state.log_weights(spn), counters).root(spn);
}

ElboWithGradient elbo_and_gradient(const OrderSpn& spn, const ElboState& state) {
  const std::vector<double> log_phi = state.log_weights(spn);
  const NodeValues v = elbo_pass(spn, state, log_phi, nullptr);
  ElboWithGradient out;
  out.value = v.root(spn);
  out.gradient.assign(spn.products().size(), 0.0);
  if (spn.sums().empty()) return out;

  std::vector<double> sum_adj(spn.sums().size(), 0.0);
  std::vector<double> product_adj(spn.products().size(), 0.0);
  sum_adj[0] = 1.0;
  for (int j = 0; j < spn.sum_layer_count(); ++j) {
    const IndexRange sums = spn.sum_layer(j);
#pragma omp parallel for schedule(static)
    for (std::int64_t s = sums.begin; s < static_cast<std::int64_t>(sums.end); ++s) {
      const SumNode& node = spn.sums()[s];
      const double adj = sum_adj[s];
      for (std::uint32_t p = node.first_child; p < node.first_child + node.child_count; ++p) {
        const double phi = std::exp(log_phi[p]);
        const double local = log_phi[p] == kNegInf ? 0.0 : v.products[p] - log_phi[p];
        out.gradient[p] = adj * phi * (local - v.sums[s]);
        product_adj[p] = adj * phi;
      }
    }
    const IndexRange prods = spn.product_layer(j);
#pragma omp parallel for schedule(static)
    for (std::int64_t p = prods.begin; p < static_cast<std::int64_t>(prods.end); ++p) {
      const ProductNode& node = spn.products()[p];
      if (node.left.kind == NodeKind::kSum) sum_adj[node.left.index] = product_adj[p];
      if (node.right.kind == NodeKind::kSum) sum_adj[node.right.index] = product_adj[p];
    }
  }
  return out;
}

std::vector<double> elbo_gradients(const OrderSpn& spn, const ElboState& state) {
  return elbo_and_gradient(spn, state).gradient;
}

FitTrace fit(OrderSpn& spn, const LeafTable& leaf, const FitConfig& config,
             const std::function<void(int, double)>& on_step) {
  if (!(config.learning_rate > 0) || config.iterations < 0)
    throw ConfigError("fit: learning rate must be positive and iterations non-negative");
  ElboState state = ElboState::init(spn, leaf);
  const std::size_t n = state.theta.size();
  std::vector<double> m(n, 0.0);
  std::vector<double> s(n, 0.0);
  FitTrace trace;
  double b1t = 1.0;
  double b2t = 1.0;
  int stalled = 0;
  for (int t = 0;; ++t) {
    const ElboWithGradient eg = elbo_and_gradient(spn, state);
    if (!std::isfinite(eg.value))
      throw NumericalError("fit: non-finite ELBO at iteration " + std::to_string(t));
    trace.elbo.push_back(eg.value);
    if (on_step) on_step(t, eg.value);
    if (t > 0 && config.early_stopping) {
      stalled = eg.value - trace.elbo[t - 1] < config.tolerance ? stalled + 1 : 0;
      if (stalled >= config.patience) break;
    }
    if (t == config.iterations) break;
    b1t *= config.beta1;
    b2t *= config.beta2;
    for (std::size_t k = 0; k < n; ++k) {
      const double g = eg.gradient[k];
      if (!std::isfinite(g)) throw NumericalError("fit: non-finite gradient at iteration " + std::to_string(t));
      m[k] = config.beta1 * m[k] + (1 - config.beta1) * g;
      s[k] = config.beta2 * s[k] + (1 - config.beta2) * g * g;
      const double mhat = m[k] / (1 - b1t);
      const double shat = s[k] / (1 - b2t);
      state.theta[k] += config.learning_rate * mhat / (std::sqrt(shat) + config.epsilon);
    }
    trace.steps = t + 1;
  }
  state.write_weights(spn);
  return trace;
}

}  // namespace orderspn
