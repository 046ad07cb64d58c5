// Layered OpenMP passes against the serial recursive reference.
#include <benchmark/benchmark.h>

#include <map>
#include <memory>
#include <random>

#include "orderspn/causal.hpp"
#include "orderspn/circuit.hpp"
#include "orderspn/elbo.hpp"
#include "orderspn/infer.hpp"
#include "orderspn/reference.hpp"
#include "orderspn/threads.hpp"

using namespace orderspn;

namespace {

class UniformOracle : public PartitionOracle {
 public:
  std::vector<Partition> propose(ParentSet, ParentSet s2, int count, std::uint64_t seed) const override {
    Rng rng(seed);
    return random_partitions(s2, count, rng);
  }
};

struct Problem {
  LeafTable leaf;
  OrderSpn spn;
};

const std::vector<std::vector<int>> kSizes = {{4, 4, 2, 2}, {16, 8, 4, 2}, {64, 16, 6, 2}};

const Problem& problem(int size) {
  static std::map<int, std::unique_ptr<Problem>> cache;
  auto& slot = cache[size];
  if (!slot) {
    const int d = 16;
    std::vector<ParentSet> cands(d);
    std::vector<std::vector<double>> scores(d);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < d; ++i) {
      for (int j = 1; j <= 6; ++j) cands[i] = cands[i].with((i + j) % d);
      scores[i].resize(std::size_t{1} << 6);
      for (double& v : scores[i]) v = normal(rng);
    }
    LeafTable leaf(LocalScoreTable(cands, scores));
    BuildOptions opt;
    opt.expansion_factors = kSizes[size];
    opt.exhaustive_threshold = 1;
    opt.on_warning = [](const std::string&) {};
    OrderSpn spn = build_regular(leaf, UniformOracle{}, opt);
    slot = std::make_unique<Problem>(Problem{std::move(leaf), std::move(spn)});
  }
  return *slot;
}

void label(benchmark::State& state, const Problem& p) {
  state.counters["edges"] = static_cast<double>(p.spn.edge_count());
  state.counters["threads"] = thread_count();
}

EdgeConjunction query() {
  EdgeConjunction c(16);
  c.require(1, 0).forbid(3, 2);
  return c;
}

void BM_MarginalLayered(benchmark::State& state) {
  const Problem& p = problem(static_cast<int>(state.range(0)));
  const auto c = query();
  for (auto _ : state) benchmark::DoNotOptimize(marginal(p.spn, p.leaf, c));
  label(state, p);
}

void BM_MarginalReference(benchmark::State& state) {
  const Problem& p = problem(static_cast<int>(state.range(0)));
  const auto c = query();
  for (auto _ : state) benchmark::DoNotOptimize(reference::marginal(p.spn, p.leaf, c));
  label(state, p);
}

void BM_ElboGradientLayered(benchmark::State& state) {
  const Problem& p = problem(static_cast<int>(state.range(0)));
  const auto s = ElboState::init(p.spn, p.leaf);
  for (auto _ : state) benchmark::DoNotOptimize(elbo_and_gradient(p.spn, s).value);
  label(state, p);
}

void BM_ElboGradientReference(benchmark::State& state) {
  const Problem& p = problem(static_cast<int>(state.range(0)));
  const auto s = ElboState::init(p.spn, p.leaf);
  for (auto _ : state) benchmark::DoNotOptimize(reference::elbo_and_gradient(p.spn, s).value);
  label(state, p);
}

void BM_BceLayered(benchmark::State& state) {
  const Problem& p = problem(static_cast<int>(state.range(0)));
  const FixedWeightModel model(Eigen::MatrixXd::Constant(16, 16, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(bce_matrix(p.spn, p.leaf, model).sum());
  label(state, p);
}

void BM_BceReference(benchmark::State& state) {
  const Problem& p = problem(static_cast<int>(state.range(0)));
  const FixedWeightModel model(Eigen::MatrixXd::Constant(16, 16, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(reference::bce_matrix(p.spn, p.leaf, model).sum());
  label(state, p);
}

}  // namespace

BENCHMARK(BM_MarginalLayered)->DenseRange(0, 2)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MarginalReference)->DenseRange(0, 2)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ElboGradientLayered)->DenseRange(0, 2)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ElboGradientReference)->DenseRange(0, 2)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BceLayered)->DenseRange(0, 2)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BceReference)->DenseRange(0, 2)->Unit(benchmark::kMillisecond)->UseRealTime();

int main(int argc, char** argv) {
  configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
