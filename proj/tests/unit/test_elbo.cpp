#include "circuit_oracle.hpp"
#include "doctest.h"
#include "orderspn/elbo.hpp"
#include "orderspn/error.hpp"
#include "orderspn/exact.hpp"
#include "orderspn/reference.hpp"

using namespace orderspn;

namespace {

double oracle_elbo(const OrderSpn& spn, const LocalScoreTable& scores) {
  double total = 0;
  for (const auto& t : testing::expand_joint(spn, scores).terms) total += std::exp(t.log_q) * (t.log_target - t.log_q);
  return total;
}

}  // namespace

TEST_CASE("ELBO equals the expectation over the written-out distribution") {
  for (const auto& k : std::vector<std::vector<int>>{{2}, {3, 2}, {4, 2, 1}}) {
    const int d = k.size() == 1 ? 2 : k.size() == 2 ? 4 : 5;
    const auto scores = testing::random_scores(testing::full(d), d, 1.0);
    const LeafTable leaf(scores);
    OrderSpn spn = testing::random_circuit(leaf, k, d);
    testing::randomize_weights(spn, 1);
    const auto state = ElboState::init(spn, leaf);
    const double expected = oracle_elbo(spn, scores);
    CHECK(elbo(spn, state) == doctest::Approx(expected).epsilon(1e-11));
    CHECK(reference::elbo_and_gradient(spn, state).value == doctest::Approx(expected).epsilon(1e-11));
    // Never above log Z.
    CHECK(elbo(spn, state) <= log_z_by_graph(scores) + 1e-12);
  }
}

TEST_CASE("ELBO gradient against central differences") {
  const auto scores = testing::random_scores(testing::full(4), 12, 1.0);
  const LeafTable leaf(scores);
  OrderSpn spn = testing::random_circuit(leaf, {3, 2}, 4);
  testing::randomize_weights(spn, 2);
  auto state = ElboState::init(spn, leaf);
  const auto g = elbo_and_gradient(spn, state);
  const auto r = reference::elbo_and_gradient(spn, state);
  const double h = 1e-6;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    auto plus = state, minus = state;
    plus.theta[k] += h;
    minus.theta[k] -= h;
    const double fd = (elbo(spn, plus) - elbo(spn, minus)) / (2 * h);
    CHECK(g.gradient[k] == doctest::Approx(fd).epsilon(1e-6).scale(1));
    CHECK(r.gradient[k] == doctest::Approx(g.gradient[k]).epsilon(1e-10).scale(1));
  }
  CHECK(elbo_gradients(spn, state) == g.gradient);
}

TEST_CASE("fit reaches log Z on an exhaustive circuit") {
  const auto scores = testing::random_scores(testing::full(4), 3, 1.0);
  const LeafTable leaf(scores);
  OrderSpn spn = testing::exhaustive_circuit(leaf);
  FitConfig cfg;
  int calls = 0;
  const FitTrace trace = fit(spn, leaf, cfg, [&](int, double) { ++calls; });
  CHECK(trace.elbo.size() == 701);
  CHECK(trace.steps == 700);
  CHECK(calls == 701);
  CHECK(trace.elbo.back() == doctest::Approx(log_z_by_graph(scores)).epsilon(1e-6));
  // Fitted weights are written back.
  CHECK(elbo(spn, ElboState::init(spn, leaf)) == doctest::Approx(trace.elbo.back()).epsilon(1e-12));
}

TEST_CASE("early stopping and bad inputs") {
  const auto scores = testing::random_scores(testing::full(4), 3, 1.0);
  const LeafTable leaf(scores);
  OrderSpn spn = testing::exhaustive_circuit(leaf);
  FitConfig cfg;
  cfg.early_stopping = true;
  cfg.iterations = 5000;
  cfg.patience = 20;
  const FitTrace trace = fit(spn, leaf, cfg);
  CHECK(trace.steps < 5000);
  CHECK(trace.elbo.size() == static_cast<std::size_t>(trace.steps) + 1);

  cfg.learning_rate = std::numeric_limits<double>::quiet_NaN();
  cfg.early_stopping = false;
  cfg.iterations = 3;
  CHECK_THROWS_AS(fit(spn, leaf, cfg), ConfigError);
}
