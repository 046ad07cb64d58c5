#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "orderspn/error.hpp"
#include "orderspn/score.hpp"

using namespace orderspn;

namespace {

Dataset chain_data(int n, std::uint64_t seed) {
  Dag g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  LinearGaussianBn bn{g, Eigen::MatrixXd::Zero(3, 3), Eigen::VectorXd::Constant(3, 0.1), Eigen::VectorXd::Zero(3)};
  bn.noise_vars(0) = 1.0;
  bn.weights(0, 1) = 2.0;
  bn.weights(1, 2) = -1.5;
  return sample_data(bn, n, seed);
}

}  // namespace

TEST_CASE("BGe for one variable matches the Normal-Gamma marginal by quadrature") {
  // Precision W ~ Gamma(alpha_w / 2, rate t / 2), mean mu | W ~ N(0, 1 / (alpha_mu W)).
  Dataset data{Eigen::MatrixXd(6, 1)};
  data.rows << 0.3, -1.2, 0.8, 1.9, -0.4, 0.1;
  const BgeParams params = BgeParams::defaults(1);
  const double a = params.alpha_w / 2, rate = params.t_scale / 2, am = params.alpha_mu;

  auto joint = [&](double mu, double w) {
    double loglik = 0.0;
    for (int r = 0; r < data.n(); ++r) {
      const double x = data.rows(r, 0);
      loglik += 0.5 * std::log(w / (2 * M_PI)) - 0.5 * w * (x - mu) * (x - mu);
    }
    const double log_mu = 0.5 * std::log(am * w / (2 * M_PI)) - 0.5 * am * w * mu * mu;
    const double log_w = a * std::log(rate) - std::lgamma(a) + (a - 1) * std::log(w) - rate * w;
    return std::exp(loglik + log_mu + log_w);
  };
  boost::math::quadrature::sinh_sinh<double> inner;
  boost::math::quadrature::exp_sinh<double> outer;
  const double evidence = outer.integrate(
      [&](double w) { return inner.integrate([&](double mu) { return joint(mu, w); }, 1e-12); }, 1e-12);
  CHECK(bge_local_score(data, 0, ParentSet{}, params) == doctest::Approx(std::log(evidence)).epsilon(1e-8));
}

TEST_CASE("BGe score equivalence and parameters") {
  const Dataset data = chain_data(50, 3);
  const BgeParams p = BgeParams::defaults(3);
  CHECK(p.alpha_mu == 1.0);
  CHECK(p.alpha_w == 5.0);
  CHECK(p.t_scale == 0.5);
  const BgeScorer s(data, p);
  const double forward = s.local_score(0, {}) + s.local_score(1, ParentSet::of({0}));
  const double backward = s.local_score(1, {}) + s.local_score(0, ParentSet::of({1}));
  CHECK(forward == doctest::Approx(backward).epsilon(1e-12));
  CHECK_THROWS_AS(s.local_score(1, ParentSet::of({1})), ConfigError);

  BgeParams bad = p;
  bad.alpha_w = 1.5;
  CHECK_THROWS_AS(BgeScorer(data, bad), ConfigError);
}

TEST_CASE("duplicating the data changes the scores") {
  const Dataset data = chain_data(30, 1);
  Dataset twice{Eigen::MatrixXd(60, 3)};
  twice.rows << data.rows, data.rows;
  const BgeParams p = BgeParams::defaults(3);
  CHECK(bge_local_score(data, 1, ParentSet::of({0}), p) != bge_local_score(twice, 1, ParentSet::of({0}), p));
}

TEST_CASE("fair prior") {
  CHECK(fair_log_prior(4, {}) == 0.0);
  CHECK(fair_log_prior(4, ParentSet::of({0, 1})) == doctest::Approx(-std::log(3.0)));
  // Each cardinality level carries the same total mass.
  double total = 0;
  for (std::uint64_t m = 0; m < 8; ++m) total += std::exp(fair_log_prior(4, ParentSet(m)));
  CHECK(total == doctest::Approx(4.0));
}

TEST_CASE("score table contents") {
  const Dataset data = chain_data(40, 2);
  const BgeParams p = BgeParams::defaults(3);
  std::vector<ParentSet> cands = {ParentSet{}, ParentSet::of({0, 2}), ParentSet::of({0, 1})};
  const auto table = build_score_table(data, cands, p);
  CHECK(table.log_scores(0).size() == 1);
  CHECK(table.log_scores(1).size() == 4);
  const BgeScorer s(data, p);
  for (int i = 0; i < 3; ++i)
    for (std::uint32_t local = 0; local < table.log_scores(i).size(); ++local) {
      const ParentSet g = table.global_mask(i, local);
      CHECK(table.log_score(i, g) == fair_log_prior(3, g) + s.local_score(i, g));
    }
  const auto three = build_score_table(data, full_candidates(3), p, StructurePrior::kUniform);
  CHECK(three.log_scores(2).size() == 4);
  CHECK(three.log_score(2, ParentSet::of({0, 1})) == s.local_score(2, ParentSet::of({0, 1})));

  // Decomposability: a graph's score is the sum of its table lookups.
  double total = 0;
  for (int i = 0; i < 3; ++i) total += s.local_score(i, i == 0 ? ParentSet{} : ParentSet::single(i - 1));
  double looked_up = 0;
  for (int i = 0; i < 3; ++i) looked_up += three.log_score(i, i == 0 ? ParentSet{} : ParentSet::single(i - 1));
  CHECK(total == looked_up);

  CHECK_THROWS_AS(build_score_table(data, {ParentSet::of({0}), {}, {}}, p), ConfigError);
  CHECK_THROWS_AS(build_score_table(data, cands, p, StructurePrior::kFair, 1), ConfigError);

  const auto round = LocalScoreTable::from_json(table.to_json());
  for (int i = 0; i < 3; ++i)
    for (std::uint32_t local = 0; local < table.log_scores(i).size(); ++local)
      CHECK(round.log_scores(i)[local] == table.log_scores(i)[local]);
}

TEST_CASE("candidate selection") {
  const Dataset data = chain_data(200, 5);
  const BgeParams p = BgeParams::defaults(3);
  const auto all = select_candidates(data, 2, p);
  for (int i = 0; i < 3; ++i) CHECK(all[i] == ParentSet::all(3).without(i));
  for (ParentSet c : select_candidates(data, 0, p)) CHECK(c.empty());
  // Oracle: the best single parent by direct evaluation.
  const auto one = select_candidates(data, 1, p);
  const BgeScorer s(data, p);
  for (int i = 0; i < 3; ++i) {
    int best = -1;
    for (int j = 0; j < 3; ++j)
      if (j != i && (best < 0 || s.local_score(i, ParentSet::single(j)) > s.local_score(i, ParentSet::single(best))))
        best = j;
    CHECK(one[i] == ParentSet::single(best));
  }
  CHECK((one[1] == ParentSet::single(0) || one[1] == ParentSet::single(2)));
  CHECK_THROWS_AS(select_candidates(data, 3, p), ConfigError);
}
