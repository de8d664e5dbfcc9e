#include <gtest/gtest.h>

#include <cmath>

#include "damsim/datagen.hpp"
#include "damsim/oracles/oracles.hpp"
#include "damsim/protocols.hpp"

namespace {

using namespace damsim;
using namespace damsim::protocols;
using losses::DataPoint;
using losses::LossKind;
using losses::LossVariant;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector scalar_vec(double v) { return Vector::Constant(1, v); }

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && std::equal(a.data(), a.data() + a.size(), b.data());
}

// Owns the data behind a Problem.
struct Fixture {
  graph::Topology topology;
  std::vector<datagen::Stream> streams;
  datagen::LogicalWeights weights;
  std::vector<graph::RoutingTree> trees;
  datagen::MixingMatrix mixing;
  LossKind kind;
  losses::DomainBall domain;

  Problem problem() const { return {streams, kind, domain, &weights}; }
  RunInputs inputs(EngineOptions engine = {}, double c = 1.0) const {
    return {problem(), &mixing, trees, c, engine};
  }
};

Fixture make_fixture(std::size_t n, Round horizon, datagen::LogicalWeights weights, std::uint64_t seed,
                     LossVariant variant = LossVariant::kDeltaNet, double radius = 10.0,
                     const char* topology = "erdos-renyi(0.5)") {
  auto topo = graph::build_topology(n, graph::GeneratorSpec::parse(topology), seed);
  const auto kind = LossKind::with_default_map(variant);
  const auto truth = datagen::gen_ground_truth(n, 3, 2, 0.6, 1.0, seed);
  auto streams = datagen::gen_streams(truth, horizon, seed, {kind.gated(), 0.8});
  auto trees = build_routing_trees(topo, weights);
  auto mixing = datagen::gen_mixing_matrix(topo);
  return Fixture{std::move(topo), std::move(streams), std::move(weights), std::move(trees), std::move(mixing),
                 kind, losses::DomainBall(radius)};
}

TEST(LearningRate, Examples) {
  EXPECT_DOUBLE_EQ(learning_rate({Protocol::kOgd, 1.0, {}}, 0, 4), 0.5);
  EXPECT_DOUBLE_EQ(learning_rate({Protocol::kCdogd, 1.0, {}}, 0, 1), 0.5);
  EXPECT_DOUBLE_EQ(learning_rate({Protocol::kDamtogd, 1.0, {2}}, 0, 6), 0.5);
  EXPECT_DOUBLE_EQ(learning_rate({Protocol::kDamtogd, 3.0, {2}}, 0, 2), 3.0);
  EXPECT_THROW(learning_rate({Protocol::kOgd, 1.0, {}}, 0, 0), ValidationError);
}

TEST(LearningRate, NonIncreasing) {
  for (auto p : {Protocol::kOgd, Protocol::kCdogd, Protocol::kDamtogd}) {
    for (int tau_min : {0, 2, 6}) {
      const ScheduleParams params{p, 0.7, {tau_min}};
      double previous = learning_rate(params, 0, 1);
      for (Round t = 2; t < 500; ++t) {
        const double eta = learning_rate(params, 0, t);
        EXPECT_LE(eta, previous);
        EXPECT_GT(eta, 0.0);
        previous = eta;
      }
    }
  }
}

TEST(Protocol, Names) {
  for (auto p : {Protocol::kOgd, Protocol::kCdogd, Protocol::kDamtogd}) EXPECT_EQ(parse_protocol(to_string(p)), p);
  EXPECT_THROW(parse_protocol("dogd"), ValidationError);
}

TEST(OgdStep, ZeroGradientIsStationary) {
  const auto w = datagen::LogicalWeights::identity(1);
  const std::vector<datagen::Stream> streams = {{DataPoint{Vector::Zero(2), Vector::Zero(2), {}}}};
  const Problem problem{streams, LossKind::with_default_map(LossVariant::kDeltaNet), losses::DomainBall(5), &w};
  const Matrix x = (Matrix(2, 2) << 1, -1, 0.5, 2).finished();
  EXPECT_EQ(ogd_step(problem, 0, x, 1), x);
}

TEST(OgdStep, ScalarDeltaNetByHand) {
  const auto w = datagen::LogicalWeights::identity(1);
  const std::vector<datagen::Stream> streams = {{
      DataPoint{scalar_vec(1.0), scalar_vec(2.0), {}},
      DataPoint{scalar_vec(0.5), scalar_vec(0.0), {}},
      DataPoint{scalar_vec(1.0), scalar_vec(1.0), {}},
  }};
  const Problem problem{streams, LossKind::with_default_map(LossVariant::kDeltaNet), losses::DomainBall(10), &w};
  // x2 = 0 - 1 * (0*1 - 2)*1 = 2
  // x3 = 2 - (1/sqrt 2) * (2*0.5 - 0)*0.5 = 2 - 0.5/sqrt 2
  // x4 = x3 - (1/sqrt 3) * (x3 - 1)
  const double x2 = 2.0;
  const double x3 = 2.0 - 0.5 / std::sqrt(2.0);
  const double x4 = x3 - (x3 - 1.0) / std::sqrt(3.0);
  Matrix x = scalar(0.0);
  x = ogd_step(problem, 0, x, 1);
  EXPECT_NEAR(x(0, 0), x2, 1e-15);
  x = ogd_step(problem, 0, x, 2);
  EXPECT_NEAR(x(0, 0), x3, 1e-15);
  x = ogd_step(problem, 0, x, 3);
  EXPECT_NEAR(x(0, 0), x4, 1e-15);
}

TEST(OgdStep, EqualGradientsUnderHalfWeights) {
  Matrix w(2, 2);
  w << 0.5, 0.5, 0.5, 0.5;
  const datagen::LogicalWeights weights(w);
  const DataPoint d{(Vector(2) << 1, -0.5).finished(), (Vector(2) << 0.3, 2).finished(), {}};
  const std::vector<datagen::Stream> streams = {{d}, {d}};
  const auto kind = LossKind::with_default_map(LossVariant::kDeltaNet);
  const Problem problem{streams, kind, losses::DomainBall(100), &weights};
  const Matrix x = (Matrix(2, 2) << 0.1, 0.2, -0.3, 0.4).finished();
  const Matrix g = losses::loss_gradient(kind, x, d);
  EXPECT_TRUE(ogd_step(problem, 0, x, 1).isApprox(x - g, 1e-15));
}

TEST(CdogdStep, IdentityMixingZeroGradients) {
  const auto topo = graph::build_topology(3, graph::GeneratorSpec::parse("ring"), 0);
  const datagen::MixingMatrix identity(Matrix::Identity(3, 3), topo);
  const auto w = datagen::LogicalWeights::uniform(3);
  const DataPoint zero{Vector::Zero(2), Vector::Zero(2), {}};
  const std::vector<datagen::Stream> streams(3, datagen::Stream{zero});
  const Problem problem{streams, LossKind::with_default_map(LossVariant::kDeltaNet), losses::DomainBall(10), &w};
  const std::vector<Matrix> states = {Matrix::Constant(2, 2, 1), Matrix::Constant(2, 2, -2), Matrix::Identity(2, 2)};
  const auto next = cdogd_step(problem, identity, states, 1);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(next[n], states[n]);
}

TEST(CdogdStep, ConsensusFixedPoint) {
  const auto topo = graph::build_topology(7, graph::GeneratorSpec::parse("erdos-renyi(0.4)"), 2);
  const auto mixing = datagen::gen_mixing_matrix(topo);
  const auto w = datagen::LogicalWeights::uniform(7);
  const DataPoint zero{Vector::Zero(3), Vector::Zero(2), {}};
  const std::vector<datagen::Stream> streams(7, datagen::Stream{zero});
  const Problem problem{streams, LossKind::with_default_map(LossVariant::kDeltaNet), losses::DomainBall(10), &w};
  const Matrix x = (Matrix(2, 3) << 1, 2, 3, -1, 0.5, 0.25).finished();
  const auto next = cdogd_step(problem, mixing, std::vector<Matrix>(7, x), 1);
  for (const auto& m : next) EXPECT_TRUE(m.isApprox(x, 1e-14));
}

TEST(CdogdStep, ThreeAgentPathByHand) {
  const std::vector<graph::Edge> edges = {{0, 1}, {1, 2}};
  const auto topo = graph::Topology::from_edges(3, edges);
  const auto mixing = datagen::gen_mixing_matrix(topo);
  // Metropolis-Hastings on 0-1-2: a01 = a12 = 1/3, a00 = a22 = 2/3, a11 = 1/3.
  EXPECT_NEAR(mixing(0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(mixing(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(mixing(1, 1), 1.0 / 3.0, 1e-15);

  const auto w = datagen::LogicalWeights::identity(3);
  const std::vector<datagen::Stream> streams = {
      {DataPoint{scalar_vec(1.0), scalar_vec(3.0), {}}},
      {DataPoint{scalar_vec(2.0), scalar_vec(1.0), {}}},
      {DataPoint{scalar_vec(-1.0), scalar_vec(0.0), {}}},
  };
  const Problem problem{streams, LossKind::with_default_map(LossVariant::kDeltaNet), losses::DomainBall(100), &w};
  const std::vector<Matrix> x = {scalar(1.0), scalar(2.0), scalar(4.0)};
  const auto next = cdogd_step(problem, mixing, x, 1);
  // eta = 1/2; grads (x k - v) k = (1-3)*1 = -2, (4-1)*2 = 6, (-4-0)*(-1) = 4
  EXPECT_NEAR(next[0](0, 0), (2.0 / 3.0) * 1 + (1.0 / 3.0) * 2 - 0.5 * -2, 1e-14);
  EXPECT_NEAR(next[1](0, 0), (1.0 / 3.0) * (1 + 2 + 4) - 0.5 * 6, 1e-14);
  EXPECT_NEAR(next[2](0, 0), (1.0 / 3.0) * 2 + (2.0 / 3.0) * 4 - 0.5 * 4, 1e-14);
}

TEST(DamTogd, FirstRoundUsesOnlyLocalTerm) {
  auto fx = make_fixture(5, 10, datagen::gen_logical_weights(5, 2.0, 10.0, 3), 3, LossVariant::kDeltaNet, 10.0,
                         "ring");
  const auto problem = fx.problem();
  DamTogdEngine engine(problem, fx.trees, 1.0);
  for (AgentId n = 0; n < 5; ++n) {
    for (AgentId m = 0; m < 5; ++m) {
      if (m != n) EXPECT_GE(engine.delays().round_trip(n, m), 2);
    }
  }
  engine.step();
  for (AgentId n = 0; n < 5; ++n) {
    const Matrix zero = Matrix::Zero(2, 3);
    const Matrix g = losses::loss_gradient(fx.kind, zero, problem.data(n, 1));
    const Matrix expected = losses::project(fx.domain, zero - 1.0 * (fx.weights(n, n) * g));
    EXPECT_TRUE(engine.iterates()[n].isApprox(expected, 1e-15));
  }
}

TEST(DamTogd, IdentityWeightsEqualPerAgentOgd) {
  for (auto variant : {LossVariant::kDeltaNet, LossVariant::kGatedSoftmax}) {
    auto fx = make_fixture(5, 80, datagen::gen_logical_weights(5, 0.0, 10.0, 4), 4, variant);
    const auto dam = run_protocol(Protocol::kDamtogd, fx.inputs());
    const auto ogd = run_protocol(Protocol::kOgd, fx.inputs());
    for (std::size_t i = 0; i < dam.iterates.size(); ++i) EXPECT_TRUE(bitwise_equal(dam.iterates[i], ogd.iterates[i]));
  }
}

TEST(DamTogd, ZeroDelayUniformWeightsEqualOgd) {
  auto fx = make_fixture(6, 80, datagen::LogicalWeights::uniform(6), 5);
  EngineOptions zero;
  zero.force_zero_delay = true;
  const auto dam = run_protocol(Protocol::kDamtogd, fx.inputs(zero));
  const auto ogd = run_protocol(Protocol::kOgd, fx.inputs());
  for (std::size_t i = 0; i < dam.iterates.size(); ++i) EXPECT_TRUE(bitwise_equal(dam.iterates[i], ogd.iterates[i]));
}

TEST(DamTogd, EngineMatchesHistoryReplay) {
  auto fx = make_fixture(4, 50, datagen::gen_logical_weights(4, 1.0, 10.0, 6), 6, LossVariant::kDeltaNet, 3.0,
                         "ring");
  const auto history = run_protocol(Protocol::kDamtogd, fx.inputs({}, 0.8));
  const auto replay = oracles::replay_damtogd(fx.problem(), fx.trees, 0.8);
  ASSERT_EQ(replay.size(), 50u);
  for (Round t = 1; t <= 50; ++t) {
    for (AgentId n = 0; n < 4; ++n) EXPECT_TRUE(bitwise_equal(history.iterate(n, t), replay[t - 1][n]));
  }
}

TEST(DamTogd, EveryGradientConsumedExactlyTauAfterSend) {
  auto fx = make_fixture(8, 60, datagen::gen_logical_weights(8, 1.0, 10.0, 7), 7, LossVariant::kSoftmaxWithNorm,
                         10.0, "ring");
  const auto problem = fx.problem();
  DamTogdEngine engine(problem, fx.trees, 1.0);
  std::size_t deliveries = 0;
  engine.set_observer([&](const DeliveryRecord& r) {
    ++deliveries;
    EXPECT_EQ(r.consumed_at, r.data_round + static_cast<Round>(engine.delays().round_trip(r.target, r.evaluator)));
  });
  const Round rounds = 59;
  for (Round t = 1; t <= rounds; ++t) {
    engine.step();
    for (const auto& x : engine.iterates()) EXPECT_LE(x.norm(), fx.domain.radius() + 1e-12);
  }
  std::size_t expected = 0;
  for (AgentId n = 0; n < 8; ++n) {
    for (AgentId m : fx.weights.support(n)) {
      if (m == n) continue;
      const auto tau = static_cast<Round>(engine.delays().round_trip(n, m));
      if (rounds > tau) expected += rounds - tau;
    }
  }
  EXPECT_EQ(deliveries, expected);
  EXPECT_GT(deliveries, 0u);
}

TEST(DamTogd, ScheduleUsesTauMin) {
  // Drop the self weight so the nearest logical peer sets tau_min.
  Matrix w = Matrix::Zero(4, 4);
  for (Eigen::Index n = 0; n < 4; ++n) {
    w(n, (n + 1) % 4) = 0.5;
    w(n, (n + 2) % 4) = 0.5;
  }
  auto fx = make_fixture(4, 30, datagen::LogicalWeights(w), 8, LossVariant::kDeltaNet, 10.0, "ring");
  const auto problem = fx.problem();
  DamTogdEngine engine(problem, fx.trees, 1.0);
  for (AgentId n = 0; n < 4; ++n) EXPECT_EQ(engine.schedule().tau_min[n], 2);
  const auto history = run_protocol(Protocol::kDamtogd, fx.inputs());
  const auto replay = oracles::replay_damtogd(fx.problem(), fx.trees, 1.0);
  for (Round t = 1; t <= 30; ++t) {
    for (AgentId n = 0; n < 4; ++n) EXPECT_TRUE(bitwise_equal(history.iterate(n, t), replay[t - 1][n]));
  }
  // No gradient reaches anyone before t = 3.
  EXPECT_TRUE(history.iterate(0, 2).isZero(0.0));
}

TEST(RunProtocol, SingleRoundKeepsInitialization) {
  auto fx = make_fixture(3, 1, datagen::LogicalWeights::uniform(3), 9);
  for (auto p : {Protocol::kOgd, Protocol::kCdogd, Protocol::kDamtogd}) {
    const auto h = run_protocol(p, fx.inputs());
    ASSERT_EQ(h.iterates.size(), 3u);
    for (const auto& x : h.iterates) EXPECT_TRUE(x.isZero(0.0));
    EXPECT_EQ(h.round_loss.rows(), 1);
  }
}

TEST(RunProtocol, DeterministicAndInsideBall) {
  auto fx = make_fixture(5, 120, datagen::gen_logical_weights(5, 2.0, 10.0, 10), 10, LossVariant::kLinearAttention,
                         2.0);
  for (auto p : {Protocol::kOgd, Protocol::kCdogd, Protocol::kDamtogd}) {
    const auto a = run_protocol(p, fx.inputs());
    const auto b = run_protocol(p, fx.inputs());
    for (std::size_t i = 0; i < a.iterates.size(); ++i) {
      EXPECT_TRUE(bitwise_equal(a.iterates[i], b.iterates[i]));
      EXPECT_LE(a.iterates[i].norm(), 2.0 + 1e-12);
    }
    EXPECT_TRUE(bitwise_equal(a.round_loss, b.round_loss));
  }
}

TEST(RunProtocol, RoundLossIsWeightedLoss) {
  auto fx = make_fixture(4, 20, datagen::gen_logical_weights(4, 2.0, 10.0, 11), 11);
  const auto h = run_protocol(Protocol::kCdogd, fx.inputs());
  for (Round t = 1; t <= 20; ++t) {
    for (AgentId n = 0; n < 4; ++n) {
      double expected = 0.0;
      for (AgentId m = 0; m < 4; ++m) {
        expected += fx.weights(n, m) * losses::loss_value(fx.kind, h.iterate(n, t), fx.problem().data(m, t));
      }
      EXPECT_NEAR(h.round_loss(t - 1, n), expected, 1e-12 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST(RunProtocol, CdogdDisagreementContracts) {
  auto fx = make_fixture(8, 1000, datagen::LogicalWeights::uniform(8), 12, LossVariant::kDeltaNet, 10.0,
                         "erdos-renyi(0.4)");
  const auto h = run_protocol(Protocol::kCdogd, fx.inputs());
  auto disagreement = [&](Round t) {
    double worst = 0.0;
    for (AgentId n = 0; n < 8; ++n) {
      for (AgentId m = 0; m < 8; ++m) worst = std::max(worst, (h.iterate(n, t) - h.iterate(m, t)).norm());
    }
    return worst;
  };
  EXPECT_LT(disagreement(1000), disagreement(10));
}

TEST(RunProtocol, MissingInputsRejected) {
  auto fx = make_fixture(3, 5, datagen::LogicalWeights::uniform(3), 13);
  auto inputs = fx.inputs();
  inputs.mixing = nullptr;
  EXPECT_THROW(run_protocol(Protocol::kCdogd, inputs), ValidationError);
  auto no_trees = fx.inputs();
  no_trees.trees = {};
  EXPECT_THROW(run_protocol(Protocol::kDamtogd, no_trees), ValidationError);
  // A tree that omits a logically required peer.
  std::vector<graph::RoutingTree> bad = fx.trees;
  bad[0] = graph::RoutingTree{0, {0}, {}};
  auto short_trees = fx.inputs();
  short_trees.trees = bad;
  EXPECT_THROW(run_protocol(Protocol::kDamtogd, short_trees), ValidationError);
}

}  // namespace
