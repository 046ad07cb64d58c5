#include "orderspn/order_mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "orderspn/error.hpp"

namespace orderspn {

OrderMcmcOracle::OrderMcmcOracle(const LeafTable& leaf, int budget) : leaf_(&leaf), budget_(budget) {
  if (budget < 0) throw ConfigError("order MCMC: budget must be non-negative");
}

double OrderMcmcOracle::order_log_score(ParentSet s1, const std::vector<int>& order) const {
  double total = 0.0;
  ParentSet before = s1;
  for (int v : order) {
    total += leaf_->log_normalizer(v, before);
    before = before.with(v);
  }
  return total;
}

template <typename Visit>
void OrderMcmcOracle::run_chain(ParentSet s1, ParentSet s2, std::uint64_t seed, Visit&& visit) const {
  Rng rng(seed);
  std::vector<int> order = s2.members();
  std::shuffle(order.begin(), order.end(), rng);
  const int n = static_cast<int>(order.size());

  // term[p] = log tau of the variable at position p given everything before it.
  std::vector<double> term(n);
  auto refresh = [&](std::vector<double>& out, const std::vector<int>& ord, int from, int to) {
    ParentSet before = s1;
    for (int p = 0; p < from; ++p) before = before.with(ord[p]);
    for (int p = from; p <= to; ++p) {
      out[p] = leaf_->log_normalizer(ord[p], before);
      before = before.with(ord[p]);
    }
  };
  refresh(term, order, 0, n - 1);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> position(0, n - 1);
  std::vector<double> trial(n);
  const int burn_in = budget_ / 4;
  for (int step = 0; step < budget_; ++step) {
    int a = 0;
    int b = 0;
    if (unit(rng) < 0.5) {
      a = std::uniform_int_distribution<int>(0, n - 2)(rng);
      b = a + 1;
    } else {
      a = position(rng);
      do b = position(rng);
      while (b == a);
      if (a > b) std::swap(a, b);
    }
    std::swap(order[a], order[b]);
    trial = term;
    refresh(trial, order, a, b);
    double delta = 0.0;
    for (int p = a; p <= b; ++p) delta += trial[p] - term[p];
    if (delta >= 0 || unit(rng) < std::exp(delta))
      term.swap(trial);
    else
      std::swap(order[a], order[b]);
    if (step >= burn_in) visit(step - burn_in, order);
  }
}

std::vector<Partition> OrderMcmcOracle::propose(ParentSet s1, ParentSet s2, int count, std::uint64_t seed) const {
  const int n = s2.size();
  if (n < 2) throw ConfigError("order MCMC: block needs at least two variables");
  std::vector<Partition> out;
  if (budget_ > 0) {
    struct Visit {
      std::int64_t hits = 0;
      std::int64_t first = 0;
    };
    std::unordered_map<std::uint64_t, Visit> visits;
    std::int64_t seen = 0;
    run_chain(s1, s2, seed, [&](int, const std::vector<int>& order) {
      ParentSet first;
      for (int p = 0; p < n / 2; ++p) first = first.with(order[p]);
      auto [it, inserted] = visits.try_emplace(first.bits(), Visit{0, seen});
      ++it->second.hits;
      ++seen;
    });
    std::vector<std::pair<std::uint64_t, Visit>> ranked(visits.begin(), visits.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
      if (x.second.hits != y.second.hits) return x.second.hits > y.second.hits;
      return x.second.first < y.second.first;
    });
    for (const auto& [bits, v] : ranked) {
      if (static_cast<int>(out.size()) >= count) break;
      const ParentSet first(bits);
      out.push_back({first, s2 - first});
    }
  }
  if (static_cast<int>(out.size()) < count) {
    Rng rng(seed ^ 0x5bd1e995ULL);
    const double available = std::exp(log_binomial(n, n / 2));
    const int missing = static_cast<int>(std::min<double>(count - static_cast<double>(out.size()),
                                                           std::round(available) - static_cast<double>(out.size())));
    if (missing > 0) {
      const auto pad = random_partitions(s2, missing, rng, out);
      out.insert(out.end(), pad.begin(), pad.end());
    }
  }
  return out;
}

std::vector<std::vector<int>> OrderMcmcOracle::sample_orders(ParentSet s1, ParentSet s2, int count,
                                                             std::uint64_t seed) const {
  if (count < 1) throw ConfigError("order MCMC: sample count must be positive");
  std::vector<std::vector<int>> out;
  if (budget_ == 0 || s2.size() < 2) {
    Rng rng(seed);
    for (int k = 0; k < count; ++k) {
      auto order = s2.members();
      std::shuffle(order.begin(), order.end(), rng);
      out.push_back(std::move(order));
    }
    return out;
  }
  const int kept = budget_ - budget_ / 4;
  if (kept < count) throw ConfigError("order MCMC: budget too small for the requested number of samples");
  // Keep the last step of each of `count` equal stretches.
  run_chain(s1, s2, seed, [&](int index, const std::vector<int>& order) {
    const std::int64_t next = static_cast<std::int64_t>(out.size() + 1) * kept / count - 1;
    if (index == next) out.push_back(order);
  });
  return out;
}

std::unique_ptr<OrderMcmcOracle> builtin_order_mcmc_oracle(const LeafTable& leaf, int budget) {
  return std::make_unique<OrderMcmcOracle>(leaf, budget);
}

}  // namespace orderspn
