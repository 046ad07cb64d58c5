#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "orderspn/circuit.hpp"
#include "orderspn/leaf.hpp"
#include "orderspn/order_mcmc.hpp"
#include "orderspn/score.hpp"

namespace testing {

using namespace orderspn;

// Scores ~ N(0, scale^2) for every G_i ⊆ C_i.
inline LocalScoreTable random_scores(const std::vector<ParentSet>& candidates, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<std::vector<double>> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i].resize(std::size_t{1} << candidates[i].size());
    for (double& v : scores[i]) v = normal(rng);
  }
  return LocalScoreTable(candidates, scores);
}

inline LocalScoreTable uniform_scores(const std::vector<ParentSet>& candidates) {
  std::vector<std::vector<double>> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scores[i].assign(std::size_t{1} << candidates[i].size(), 0.0);
  return LocalScoreTable(candidates, scores);
}

// Picks uniformly random partitions; enough for tests that do not care about quality.
class RandomOracle : public PartitionOracle {
 public:
  std::vector<Partition> propose(ParentSet, ParentSet s2, int count, std::uint64_t seed) const override {
    Rng rng(seed);
    return random_partitions(s2, count, rng);
  }
};

// Every balanced partition at every level: the circuit covers all d! orders.
inline OrderSpn exhaustive_circuit(const LeafTable& leaf) {
  BuildOptions opt;
  const int d = leaf.d();
  const int layers = regular_layer_count(d);
  opt.expansion_factors.assign(layers, 1000);
  opt.exhaustive_threshold = d;
  opt.on_warning = [](const std::string&) {};
  return build_regular(leaf, RandomOracle{}, opt);
}

inline OrderSpn random_circuit(const LeafTable& leaf, std::vector<int> factors, std::uint64_t seed) {
  BuildOptions opt;
  opt.expansion_factors = std::move(factors);
  opt.exhaustive_threshold = 1;
  opt.seed = seed;
  opt.on_warning = [](const std::string&) {};
  return build_regular(leaf, RandomOracle{}, opt);
}

// Random weights on the simplex of each sum node.
inline void randomize_weights(OrderSpn& spn, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(spn.products().size());
  for (const SumNode& s : spn.sums()) {
    double norm = kNegInf;
    for (std::uint32_t k = 0; k < s.child_count; ++k) {
      w[s.first_child + k] = normal(rng);
      norm = log_add(norm, w[s.first_child + k]);
    }
    for (std::uint32_t k = 0; k < s.child_count; ++k) w[s.first_child + k] -= norm;
  }
  spn.set_log_weights(w);
}

inline std::vector<ParentSet> full(int d) { return full_candidates(d); }

}  // namespace testing
