#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "orderspn/error.hpp"
#include "orderspn/exact.hpp"

using namespace orderspn;

TEST_CASE("exact posterior normaliser by two routes") {
  for (int d = 1; d <= 5; ++d) {
    auto cands = testing::full(d);
    if (d >= 3) cands[0] = cands[0].without(1);
    const auto scores = testing::random_scores(cands, 7 * d, 2.0);
    const ExactPosterior post = enumerate_posterior(scores, d);
    CHECK(post.log_z() == doctest::Approx(log_z_by_graph(scores)).epsilon(1e-12));
    double total = 0;
    for (const auto& e : post.entries()) total += std::exp(post.log_prob(e));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    std::size_t fact = 1;
    for (int k = 2; k <= d; ++k) fact *= k;
    CHECK(post.orders().size() == fact);
  }
  CHECK_THROWS_AS(enumerate_posterior(testing::uniform_scores(testing::full(6)), 6), ConfigError);
}

TEST_CASE("uniform scores over d = 3") {
  // Each of the 6 orders admits 2^3 graphs.
  const auto scores = testing::uniform_scores(testing::full(3));
  const ExactPosterior post = enumerate_posterior(scores, 3);
  CHECK(post.entries().size() == 48);
  CHECK(post.log_z() == doctest::Approx(std::log(48.0)));
  // p(0 -> 1) = (orders with 0 before 1) * half of their graphs.
  EdgeConjunction c(3);
  c.require(0, 1);
  CHECK(std::exp(exact_marginal(post, c)) == doctest::Approx(0.25));
  // The empty graph is admitted by all 6 orders, so it has mass 6/48.
  const auto dist = exact_graph_distribution(post);
  CHECK(dist.size() == 25);
  const auto empty = std::find_if(dist.begin(), dist.end(), [](const auto& p) { return p.first.edge_count() == 0; });
  REQUIRE(empty != dist.end());
  CHECK(empty->second == doctest::Approx(6.0 / 48));

  EdgeConjunction given(3);
  given.require(1, 0);
  CHECK(exact_conditional(post, c, given) == kNegInf);
  EdgeConjunction cyc(3);
  cyc.require(0, 1).require(1, 2).require(2, 0);
  CHECK_THROWS_AS(exact_mpe(post, cyc), InfeasibleError);
  CHECK(post.log_prob(Order({0, 1, 2}), Dag(std::vector<ParentSet>{ParentSet::single(1), {}, {}})) == kNegInf);
}

TEST_CASE("exact edge marginals agree with per-edge marginals") {
  const auto scores = testing::random_scores(testing::full(4), 1, 1.0);
  const ExactPosterior post = enumerate_posterior(scores, 4);
  const Eigen::MatrixXd m = exact_edge_marginals(post);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      if (i == j) continue;
      EdgeConjunction c(4);
      c.require(j, i);
      CHECK(m(j, i) == doctest::Approx(std::exp(exact_marginal(post, c))).epsilon(1e-12));
    }
  const ExactMpe best = exact_mpe(post, EdgeConjunction(4));
  for (const auto& e : post.entries()) CHECK(post.log_prob(e) <= best.log_prob + 1e-12);
}
