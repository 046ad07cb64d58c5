#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "orderspn/error.hpp"
#include "orderspn/leaf.hpp"

using namespace orderspn;
using testing::random_scores;
using testing::uniform_scores;

namespace {

// Direct enumeration over subsets of C_i inside s1 satisfying the literals.
struct Enumerated {
  double log_sum = kNegInf;
  double log_max = kNegInf;
  ParentSet argmax;
  double log_norm = kNegInf;
};

Enumerated enumerate(const LocalScoreTable& t, int i, ParentSet s1, ParentSet req, ParentSet forb) {
  Enumerated e;
  for (std::uint32_t local = 0; local < t.log_scores(i).size(); ++local) {
    const ParentSet g = t.global_mask(i, local);
    if (!g.subset_of(s1)) continue;
    const double v = t.log_scores(i)[local];
    e.log_norm = log_add(e.log_norm, v);
    if (!req.subset_of(g) || g.intersects(forb)) continue;
    e.log_sum = log_add(e.log_sum, v);
    if (v > e.log_max || (v == e.log_max && g.bits() < e.argmax.bits())) {
      e.log_max = v;
      e.argmax = g;
    }
  }
  return e;
}

double p_value(const std::vector<double>& expected_probs, const std::vector<int>& counts, int n) {
  double stat = 0;
  int cells = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (expected_probs[k] <= 0) {
      CHECK(counts[k] == 0);
      continue;
    }
    const double e = expected_probs[k] * n;
    stat += (counts[k] - e) * (counts[k] - e) / e;
    ++cells;
  }
  if (cells < 2) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(cells - 1), stat));
}

}  // namespace

TEST_CASE("leaf table examples with uniform scores") {
  const auto scores = uniform_scores({ParentSet{}, ParentSet::of({0, 2}), ParentSet{}});
  const LeafTable leaf(scores);
  const std::uint32_t a = leaf.local_mask(1, ParentSet::single(0));
  CHECK(leaf.sum_cell(1, leaf.key(1, 0, 0)) == doctest::Approx(std::log(4.0)));
  CHECK(leaf.sum_cell(1, leaf.key(1, a, 0)) == doctest::Approx(std::log(2.0)));
  CHECK(leaf.sum_cell(1, leaf.key(1, 3, 0)) == 0.0);

  const ParentSet both = ParentSet::of({0, 2});
  CHECK(leaf.marginal(1, both, {}, {}) == 0.0);
  CHECK(leaf.marginal(1, both, ParentSet::single(0), {}) == doctest::Approx(std::log(0.5)));
  CHECK(leaf.marginal(1, ParentSet::single(2), ParentSet::single(0), {}) == kNegInf);
  // Uniform ties go to the smallest mask.
  CHECK(leaf.mpe(1, both, {}, {}).parents.empty());
  CHECK(leaf.mpe(1, both, ParentSet::single(2), {}).parents == ParentSet::single(2));
}

TEST_CASE("leaf table recurrences and queries against enumeration") {
  for (int k = 0; k <= 8; ++k) {
    const int d = k + 2;
    std::vector<ParentSet> cands(d);
    cands[0] = ParentSet::all(d).without(0).without(d - 1);  // |C_0| = k
    const auto scores = random_scores(cands, 100 + k, 3.0);
    const LeafTable leaf(scores);
    const auto members = scores.candidate_members(0);
    std::uint32_t cells = 1;
    for (int b = 0; b < k; ++b) cells *= 3;
    for (std::uint32_t key = 0; key < cells; ++key) {
      std::uint32_t rest = key, req = 0, forb = 0;
      for (int b = 0; b < k; ++b, rest /= 3) {
        if (rest % 3 == 1) req |= 1U << b;
        if (rest % 3 == 2) forb |= 1U << b;
      }
      CHECK(leaf.key(0, req, forb) == key);
      const auto e = enumerate(scores, 0, ParentSet::all(d), leaf.global_mask(0, req), leaf.global_mask(0, forb));
      CHECK(leaf.sum_cell(0, key) == doctest::Approx(e.log_sum).epsilon(1e-12));
      CHECK(leaf.max_cell(0, key) == e.log_max);
      CHECK(leaf.global_mask(0, leaf.argmax_cell(0, key)) == e.argmax);
    }
    // Queries under random s1 and literals.
    std::mt19937_64 rng(k);
    for (int trial = 0; trial < 40; ++trial) {
      const ParentSet s1(rng() & ParentSet::all(d).without(0).bits());
      const ParentSet req(rng() & rng() & cands[0].bits());
      const ParentSet forb(rng() & rng() & cands[0].bits() & ~req.bits());
      const auto e = enumerate(scores, 0, s1, req, forb);
      const double m = leaf.marginal(0, s1, req, forb);
      if (e.log_sum == kNegInf) {
        CHECK(m == kNegInf);
      } else {
        CHECK(std::abs(m - (e.log_sum - e.log_norm)) < 1e-10);
      }
      CHECK(leaf.log_normalizer(0, s1) == doctest::Approx(e.log_norm).epsilon(1e-12));
      const LeafMpe best = leaf.mpe(0, s1, req, forb);
      if (e.log_max == kNegInf) {
        CHECK(best.log_prob == kNegInf);
      } else {
        CHECK(std::abs(best.log_prob - (e.log_max - e.log_norm)) < 1e-10);
        CHECK(best.parents == e.argmax);
        CHECK(best.log_prob <= 0.0);
      }
      // Total probability over one free candidate.
      for (int j : (cands[0] & s1).members()) {
        if (req.contains(j) || forb.contains(j)) continue;
        const double with = leaf.marginal(0, s1, req.with(j), forb);
        const double without = leaf.marginal(0, s1, req, forb.with(j));
        CHECK(std::exp(with) + std::exp(without) == doctest::Approx(std::exp(m)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("leaf sampling") {
  const auto scores = uniform_scores({ParentSet{}, ParentSet::of({0, 2}), ParentSet{}});
  const LeafTable leaf(scores);
  const ParentSet both = ParentSet::of({0, 2});
  Rng rng(42);
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int t = 0; t < n; ++t) ++counts[leaf.local_mask(1, leaf.sample(1, both, {}, {}, rng))];
  for (int c : counts) CHECK(std::abs(c - n / 4.0) < 3 * std::sqrt(n * 0.25 * 0.75));

  // Fully decided literals give a deterministic draw; infeasible ones throw.
  CHECK(leaf.sample(1, both, ParentSet::single(2), ParentSet::single(0), rng) == ParentSet::single(2));
  CHECK_THROWS_AS(leaf.sample(1, ParentSet::single(2), ParentSet::single(0), {}, rng), InfeasibleError);

  SUBCASE("conditional frequencies follow the enumerated conditional") {
    std::vector<ParentSet> cands(5);
    cands[4] = ParentSet::of({0, 1, 2, 3});
    const auto rs = random_scores(cands, 9, 1.0);
    const LeafTable lt(rs);
    const ParentSet s1 = ParentSet::of({0, 1, 2});
    const ParentSet req = ParentSet::single(1);
    const double log_norm = lt.marginal(4, s1, req, {});
    std::vector<double> probs(16, 0.0);
    for (std::uint32_t local = 0; local < 16; ++local) {
      const ParentSet g = rs.global_mask(4, local);
      if (!g.subset_of(s1) || !req.subset_of(g)) continue;
      probs[local] = std::exp(lt.marginal(4, s1, g, s1 - g) - log_norm);
    }
    std::vector<int> freq(16, 0);
    for (int t = 0; t < n; ++t) ++freq[rs.local_mask(4, lt.sample(4, s1, req, {}, rng))];
    CHECK(p_value(probs, freq, n) > 0.01);
  }
}

TEST_CASE("edge conjunctions") {
  EdgeConjunction c(3);
  c.require(0, 1).forbid(2, 1);
  CHECK(c.literal_count() == 2);
  CHECK_THROWS_AS(c.forbid(0, 1), ConfigError);
  CHECK_THROWS_AS(c.require(1, 1), ConfigError);
  EdgeConjunction other(3);
  other.require(2, 1);
  CHECK_FALSE(EdgeConjunction::conjoin(c, other).has_value());
  Dag g(3);
  g.add_edge(0, 1);
  CHECK(c.satisfied_by(g));
  CHECK(EdgeConjunction::full(g).satisfied_by(g));
}

TEST_CASE("leaf table cap and large builds") {
  std::vector<ParentSet> cands(14);
  cands[13] = ParentSet::all(12);
  const auto scores = random_scores(cands, 1);
  CHECK_THROWS_AS(LeafTable(scores, 8), ConfigError);
  const LeafTable big(scores);
  CHECK(big.candidate_count(13) == 12);
}
