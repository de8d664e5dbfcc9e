#include <benchmark/benchmark.h>

#include "damsim/datagen.hpp"
#include "damsim/graph.hpp"
#include "damsim/losses.hpp"
#include "damsim/protocols.hpp"
#include "damsim/regret.hpp"

namespace {

using namespace damsim;

struct Setup {
  graph::Topology topology;
  datagen::GroundTruth truth;
  std::vector<datagen::Stream> streams;
  datagen::LogicalWeights weights;
  std::vector<graph::RoutingTree> trees;
  losses::LossKind kind = losses::LossKind::with_default_map(losses::LossVariant::kDeltaNet);
  losses::DomainBall domain{10.0};

  Setup(std::size_t n, Round horizon, std::size_t dim)
      : topology(graph::build_topology(n, graph::GeneratorSpec::parse("erdos-renyi(0.2)"), 7)),
        truth(datagen::gen_ground_truth(n, dim, dim, 0.75, 1.0, 1)),
        streams(datagen::gen_streams(truth, horizon, 1)),
        weights(datagen::gen_logical_weights(n, 2.0, 10.0, 1)),
        trees(protocols::build_routing_trees(topology, weights)) {}

  protocols::Problem problem() const { return {streams, kind, domain, &weights}; }
};

void BM_LossGradient(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto truth = datagen::gen_ground_truth(1, d, d, 0.75, 1.0, 1);
  const auto stream = datagen::gen_stream(truth, 0, 1, 1);
  const auto kind = losses::LossKind::with_default_map(losses::LossVariant::kSoftmaxWithNorm);
  const Matrix x = Matrix::Constant(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(losses::loss_gradient(kind, x, stream.front()));
}
BENCHMARK(BM_LossGradient)->Arg(8)->Arg(32)->Arg(128);

void BM_Project(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const losses::DomainBall ball(1.0);
  const Matrix x = Matrix::Constant(d, d, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(losses::project(ball, x));
}
BENCHMARK(BM_Project)->Arg(8)->Arg(128);

void BM_SteinerTree(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto topo = graph::build_topology(n, graph::GeneratorSpec::parse("erdos-renyi(0.2)"), 3);
  std::vector<AgentId> terminals;
  for (AgentId m = 0; m < n; m += 2) terminals.push_back(m);
  for (auto _ : state) benchmark::DoNotOptimize(graph::build_steiner_tree(topo, 1, terminals));
}
BENCHMARK(BM_SteinerTree)->Arg(20)->Arg(100);

void BM_EngineStep(benchmark::State& state) {
  const Setup setup(static_cast<std::size_t>(state.range(0)), 20000, 8);
  const auto problem = setup.problem();
  protocols::DamTogdEngine engine(problem, setup.trees, 1.0);
  for (auto _ : state) {
    if (engine.round() >= 20000) {
      state.SkipWithError("stream exhausted");
      break;
    }
    engine.step();
  }
}
BENCHMARK(BM_EngineStep)->Arg(20)->Iterations(2000);

void BM_HindsightOptimum(benchmark::State& state) {
  const Setup setup(20, static_cast<Round>(state.range(0)), 8);
  const auto problem = setup.problem();
  for (auto _ : state) benchmark::DoNotOptimize(regret::hindsight_optimum(problem, 0, setup.streams.front().size()));
}
BENCHMARK(BM_HindsightOptimum)->Arg(2500)->Unit(benchmark::kMillisecond);

void BM_RunProtocol(benchmark::State& state) {
  const Setup setup(20, 500, 8);
  const auto mixing = datagen::gen_mixing_matrix(setup.topology);
  const auto p = static_cast<protocols::Protocol>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(protocols::run_protocol(p, {setup.problem(), &mixing, setup.trees, 1.0, {}}));
  }
  state.SetLabel(std::string(protocols::to_string(p)));
}
BENCHMARK(BM_RunProtocol)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
