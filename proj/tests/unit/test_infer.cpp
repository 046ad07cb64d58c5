#include <boost/math/distributions/chi_squared.hpp>
#include <map>

#include "circuit_oracle.hpp"
#include "doctest.h"
#include "orderspn/error.hpp"
#include "orderspn/exact.hpp"
#include "orderspn/infer.hpp"
#include "orderspn/reference.hpp"

using namespace orderspn;
using testing::expand_joint;
using testing::joint_log_prob;

namespace {

struct Fixture {
  LocalScoreTable scores;
  LeafTable leaf;
  OrderSpn spn;
};

Fixture make(int d, std::vector<int> k, std::uint64_t seed) {
  std::vector<ParentSet> cands = testing::full(d);
  // Drop one candidate per variable when d > 3 so that C_i is a proper subset.
  if (d > 3)
    for (int i = 0; i < d; ++i) cands[i] = cands[i].without((i + 1) % d);
  auto scores = testing::random_scores(cands, seed, 1.5);
  LeafTable leaf(scores);
  OrderSpn spn = testing::random_circuit(leaf, std::move(k), seed);
  testing::randomize_weights(spn, seed + 1);
  return {std::move(scores), std::move(leaf), std::move(spn)};
}

EdgeConjunction random_conjunction(int d, std::mt19937_64& rng, int literals) {
  EdgeConjunction c(d);
  std::uniform_int_distribution<int> var(0, d - 1);
  for (int n = 0; n < literals; ++n) {
    const int a = var(rng), b = var(rng);
    if (a == b) continue;
    try {
      (rng() & 1) ? c.require(a, b) : c.forbid(a, b);
    } catch (const ConfigError&) {
    }
  }
  return c;
}

}  // namespace

TEST_CASE("marginals and conditionals against the written-out distribution") {
  for (const auto& [d, k] : std::vector<std::pair<int, std::vector<int>>>{{2, {2}}, {3, {2, 1}}, {4, {3, 2}}, {5, {4, 2, 1}}}) {
    auto f = make(d, k, 31 + d);
    const auto joint = expand_joint(f.spn, f.scores);
    double total = 0;
    for (const auto& t : joint.terms) total += std::exp(t.log_q);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(marginal(f.spn, f.leaf, EdgeConjunction(d)) == doctest::Approx(0.0).scale(1).epsilon(1e-12));

    std::mt19937_64 rng(d);
    for (int trial = 0; trial < 60; ++trial) {
      const auto c = random_conjunction(d, rng, 1 + trial % 4);
      const double expected = joint_log_prob(joint, c);
      const double got = marginal(f.spn, f.leaf, c);
      if (expected == kNegInf) {
        CHECK(got == kNegInf);
        continue;
      }
      CHECK(got == doctest::Approx(expected).epsilon(1e-10));
      CHECK(reference::marginal(f.spn, f.leaf, c) == doctest::Approx(expected).epsilon(1e-10));

      const auto given = random_conjunction(d, rng, 1);
      const double pg = joint_log_prob(joint, given);
      if (pg == kNegInf) {
        CHECK_THROWS_AS(conditional(f.spn, f.leaf, c, given), InfeasibleError);
        continue;
      }
      const auto both = EdgeConjunction::conjoin(c, given);
      const double cond = conditional(f.spn, f.leaf, c, given);
      if (!both) {
        CHECK(cond == kNegInf);
      } else if (const double pb = joint_log_prob(joint, *both); pb == kNegInf) {
        CHECK(cond == kNegInf);
      } else {
        CHECK(cond == doctest::Approx(pb - pg).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("marginal pass touches each edge once") {
  auto f = make(8, {4, 3, 2}, 3);
  PassCounters counters;
  marginal(f.spn, f.leaf, EdgeConjunction(8), &counters);
  CHECK(counters.edge_visits == f.spn.edge_count());
  CHECK(counters.leaf_evaluations == f.spn.leaves().size());
}

TEST_CASE("MPE against the written-out distribution") {
  for (int d = 2; d <= 5; ++d) {
    const std::vector<std::vector<int>> factors = {{2}, {2, 1}, {3, 2}, {3, 2, 1}};
    auto f = make(d, factors[d - 2], 50 + d);
    const auto joint = expand_joint(f.spn, f.scores);
    std::mt19937_64 rng(d);
    for (int trial = 0; trial < 20; ++trial) {
      const auto given = random_conjunction(d, rng, trial % 3);
      const double pg = joint_log_prob(joint, given);
      if (pg == kNegInf) {
        CHECK_THROWS_AS(mpe(f.spn, f.leaf, given), InfeasibleError);
        continue;
      }
      double best = kNegInf;
      for (const auto& t : joint.terms)
        if (given.satisfied_by(t.dag)) best = std::max(best, t.log_q);
      const MpeResult r = mpe(f.spn, f.leaf, given);
      CHECK(r.log_prob == doctest::Approx(best - pg).epsilon(1e-10));
      CHECK(given.satisfied_by(r.dag));
      CHECK(r.order.admits(r.dag));
      // The decoded pair attains the maximum.
      bool attained = false;
      for (const auto& t : joint.terms)
        if (t.order == r.order.perm() && t.dag == r.dag) attained = std::abs(t.log_q - best) < 1e-10;
      CHECK(attained);
    }
  }
}

TEST_CASE("sampling frequencies match the written-out distribution") {
  auto f = make(3, {2, 1}, 77);
  const auto joint = expand_joint(f.spn, f.scores);
  const int n = 60000;
  EdgeConjunction given(3);
  given.require(0, 1);
  for (const EdgeConjunction* g : {static_cast<const EdgeConjunction*>(nullptr), static_cast<const EdgeConjunction*>(&given)}) {
    const double pg = g ? joint_log_prob(joint, *g) : 0.0;
    const auto draws = sample_many(f.spn, f.leaf, n, 5, g);
    std::map<std::pair<std::vector<int>, std::vector<std::uint64_t>>, int> counts;
    for (const auto& s : draws) {
      std::vector<std::uint64_t> cols;
      for (ParentSet p : s.dag.columns()) cols.push_back(p.bits());
      ++counts[{s.order.perm(), cols}];
      if (g) CHECK(g->satisfied_by(s.dag));
    }
    double stat = 0;
    int cells = 0;
    for (const auto& t : joint.terms) {
      if (g && !g->satisfied_by(t.dag)) continue;
      std::vector<std::uint64_t> cols;
      for (ParentSet p : t.dag.columns()) cols.push_back(p.bits());
      const double e = std::exp(t.log_q - pg) * n;
      const int o = counts.count({t.order, cols}) ? counts[{t.order, cols}] : 0;
      stat += (o - e) * (o - e) / e;
      ++cells;
    }
    const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(cells - 1), stat));
    CHECK(p > 0.001);
  }
  // Deterministic in the seed.
  const auto a = sample_many(f.spn, f.leaf, 100, 9);
  const auto b = sample_many(f.spn, f.leaf, 100, 9);
  for (int k = 0; k < 100; ++k) CHECK(a[k].dag == b[k].dag);
}

TEST_CASE("edge marginals") {
  auto f = make(4, {3, 2}, 8);
  const auto joint = expand_joint(f.spn, f.scores);
  const Eigen::MatrixXd m = edge_marginals(f.spn, f.leaf);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      if (i == j) {
        CHECK(m(j, i) == 0.0);
        continue;
      }
      EdgeConjunction c(4);
      c.require(j, i);
      const double lp = joint_log_prob(joint, c);
      CHECK(m(j, i) == doctest::Approx(lp == kNegInf ? 0.0 : std::exp(lp)).epsilon(1e-10));
    }
}

TEST_CASE("posterior weights on an exhaustive circuit recover the exact posterior") {
  for (int d = 2; d <= 5; ++d) {
    const auto scores = testing::random_scores(testing::full(d), 90 + d, 2.0);
    const LeafTable leaf(scores);
    OrderSpn spn = testing::exhaustive_circuit(leaf);
    set_posterior_weights(spn, leaf);
    const ExactPosterior post = enumerate_posterior(scores, d);
    CHECK(log_mass(spn, leaf) == doctest::Approx(post.log_z()).epsilon(1e-12));
    CHECK(reference::log_mass(spn, leaf) == doctest::Approx(post.log_z()).epsilon(1e-12));
    std::mt19937_64 rng(d);
    for (int trial = 0; trial < 10; ++trial) {
      const auto c = random_conjunction(d, rng, 2);
      CHECK(std::exp(marginal(spn, leaf, c)) == doctest::Approx(std::exp(exact_marginal(post, c))).epsilon(1e-10));
    }
    const auto r = mpe(spn, leaf, EdgeConjunction(d));
    CHECK(r.log_prob == doctest::Approx(exact_mpe(post, EdgeConjunction(d)).log_prob).epsilon(1e-10));
    CHECK(post.log_prob(r.order, r.dag) == doctest::Approx(r.log_prob).epsilon(1e-10));
  }
}
