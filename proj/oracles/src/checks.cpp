#include "damsim/oracles/checks.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <fmt/format.h>

#include "damsim/datagen.hpp"
#include "damsim/oracles/oracles.hpp"
#include "damsim/regret.hpp"
#include "damsim/rng.hpp"

namespace damsim::oracles {
namespace {

using losses::FeatureMap;
using losses::LossKind;
using losses::LossVariant;
using protocols::Protocol;

constexpr LossVariant kVariants[] = {
    LossVariant::kLinearAttention, LossVariant::kGatedLinearAttention, LossVariant::kDeltaNet,
    LossVariant::kSoftmaxNoNorm,   LossVariant::kSoftmaxWithNorm,      LossVariant::kGatedSoftmax,
};

int uniform_int(Rng& rng, int lo, int hi) { return boost::random::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(Rng& rng, double lo, double hi) { return boost::random::uniform_real_distribution<double>(lo, hi)(rng); }

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = uniform(rng, -scale, scale);
  return m;
}

LossKind kind_for(LossVariant v, int index) {
  LossKind kind = LossKind::with_default_map(v);
  if (losses::is_softmax_family(v)) {
    constexpr FeatureMap maps[] = {FeatureMap::kNormalizedExp, FeatureMap::kElementwiseExp, FeatureMap::kIdentity};
    kind.feature_map = maps[index % 3];
  }
  return kind;
}

losses::DataPoint random_point(Rng& rng, Eigen::Index dk, Eigen::Index dv) {
  boost::random::normal_distribution<double> gauss;
  boost::random::bernoulli_distribution<double> coin(0.5);
  losses::DataPoint d;
  d.key = random_matrix(rng, dk, 1, 1.0);
  d.value.resize(dv);
  d.gate.resize(dv);
  for (Eigen::Index i = 0; i < dv; ++i) {
    d.value(i) = gauss(rng);
    d.gate(i) = coin(rng) ? 1.0 : 0.0;
  }
  return d;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && std::equal(a.data(), a.data() + a.size(), b.data());
}

// Owns everything a Problem points at.
struct Instance {
  graph::Topology topology;
  std::vector<datagen::Stream> streams;
  datagen::LogicalWeights weights;
  std::vector<graph::RoutingTree> trees;
  LossKind kind;
  losses::DomainBall domain;

  protocols::Problem problem() const { return {streams, kind, domain, &weights}; }
};

// Random weights with optional sparsified rows (diagonal kept or dropped).
datagen::LogicalWeights random_weights(Rng& rng, std::size_t n, bool sparse) {
  Matrix w = datagen::gen_logical_weights(n, uniform(rng, 0.3, 3.0), 10.0, rng()).matrix();
  if (!sparse) return datagen::LogicalWeights(w);
  boost::random::bernoulli_distribution<double> keep(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (j != r && !keep(rng)) w(r, j) = 0.0;
    }
    const bool has_remote = (w.row(r).array() > 0.0).count() > 1;
    if (has_remote && uniform(rng, 0.0, 1.0) < 0.25) w(r, r) = 0.0;
    w.row(r) /= w.row(r).sum();
  }
  return datagen::LogicalWeights(w);
}

Instance random_instance(Rng& rng, int index, bool sparse) {
  const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 6));
  const auto horizon = static_cast<std::size_t>(uniform_int(rng, 20, 100));
  const auto dk = static_cast<std::size_t>(uniform_int(rng, 2, 4));
  const auto dv = static_cast<std::size_t>(uniform_int(rng, 2, 4));
  const LossKind kind = kind_for(kVariants[index % 6], index / 6);

  auto topology = graph::build_topology(n, {graph::GeneratorSpec::Kind::kErdosRenyi, 0.4}, rng());
  auto weights = random_weights(rng, n, sparse);
  const auto truth = datagen::gen_ground_truth(n, dk, dv, uniform(rng, 0.0, 1.0), 1.0, rng());
  auto streams = datagen::gen_streams(truth, horizon, rng(), {kind.gated(), 0.7});
  auto trees = protocols::build_routing_trees(topology, weights);
  return Instance{std::move(topology), std::move(streams), std::move(weights), std::move(trees), kind,
                  losses::DomainBall(uniform(rng, 1.0, 20.0))};
}

bool same_trajectory(const protocols::RunHistory& a, const protocols::RunHistory& b) {
  if (a.iterates.size() != b.iterates.size()) return false;
  for (std::size_t i = 0; i < a.iterates.size(); ++i) {
    if (!bitwise_equal(a.iterates[i], b.iterates[i])) return false;
  }
  return true;
}

}  // namespace

CheckResult check_gradients(std::uint64_t seed, int instances) {
  CheckResult result{"gradient finite differences", true, {}};
  double worst = 0.0;
  std::string worst_at;
  for (std::size_t v = 0; v < std::size(kVariants); ++v) {
    Rng rng = make_rng(seed, SeedPurpose::kProbe, 100 + v);
    for (int i = 0; i < instances; ++i) {
      const LossKind kind = kind_for(kVariants[v], i);
      const auto dk = uniform_int(rng, 2, 6);
      const auto dv = uniform_int(rng, 2, 6);
      const Matrix x = random_matrix(rng, dv, dk, 2.0);
      const auto d = random_point(rng, dk, dv);
      const double err = gradient_relative_error(losses::loss_gradient(kind, x, d),
                                                 finite_difference_gradient(kind, x, d, 1e-5));
      if (err > worst) {
        worst = err;
        worst_at = fmt::format("{}/{}", losses::to_string(kind.variant), losses::to_string(kind.feature_map));
      }
    }
  }
  result.pass = worst < 1e-6;
  result.detail = fmt::format("{} instances, max relative error {:.3g} ({}), limit 1e-6",
                              instances * static_cast<int>(std::size(kVariants)), worst, worst_at);
  return result;
}

CheckResult check_engine_replay(std::uint64_t seed, int configs) {
  CheckResult result{"engine vs history replay", true, {}};
  int mismatches = 0;
  double worst_norm_excess = 0.0;
  for (int i = 0; i < configs; ++i) {
    Rng rng = make_rng(seed, SeedPurpose::kProbe, 200 + static_cast<std::uint64_t>(i));
    const auto inst = random_instance(rng, i, i % 2 == 1);
    const double c = uniform(rng, 0.25, 2.0);
    const auto problem = inst.problem();

    const auto history = protocols::run_protocol(Protocol::kDamtogd, {problem, nullptr, inst.trees, c, {}});
    const auto replay = replay_damtogd(problem, inst.trees, c);
    bool equal = history.horizon == replay.size();
    for (Round t = 1; equal && t <= history.horizon; ++t) {
      for (AgentId n = 0; n < problem.n_agents(); ++n) {
        worst_norm_excess = std::max(worst_norm_excess, history.iterate(n, t).norm() - inst.domain.radius());
        if (!bitwise_equal(history.iterate(n, t), replay[t - 1][n])) {
          equal = false;
          break;
        }
      }
    }
    if (!equal) {
      ++mismatches;
      if (result.detail.empty()) result.detail = fmt::format("first mismatch in config {}; ", i);
    }
  }
  result.pass = mismatches == 0 && worst_norm_excess <= 1e-12;
  result.detail += fmt::format("{} configs, {} mismatches, max ||X|| - R = {:.3g}", configs, mismatches,
                               worst_norm_excess);
  return result;
}

CheckResult check_reductions(std::uint64_t seed, int configs) {
  CheckResult result{"reductions to OGD", true, {}};
  int failures_identity = 0;
  int failures_zero_delay = 0;
  for (int i = 0; i < configs; ++i) {
    Rng rng = make_rng(seed, SeedPurpose::kProbe, 300 + static_cast<std::uint64_t>(i));
    auto inst = random_instance(rng, i, false);

    // (a) W = I, real trees and delays.
    {
      Instance local{inst.topology, inst.streams, datagen::LogicalWeights::identity(inst.streams.size()), {},
                     inst.kind, inst.domain};
      local.trees = protocols::build_routing_trees(local.topology, local.weights);
      const auto problem = local.problem();
      const auto dam = protocols::run_protocol(Protocol::kDamtogd, {problem, nullptr, local.trees, 1.0, {}});
      const auto ogd = protocols::run_protocol(Protocol::kOgd, {problem, nullptr, {}, 1.0, {}});
      if (!same_trajectory(dam, ogd)) ++failures_identity;
    }
    // (b) tau forced to 0, dense and uniform weights.
    for (bool uniform_w : {false, true}) {
      Instance local{inst.topology, inst.streams,
                     uniform_w ? datagen::LogicalWeights::uniform(inst.streams.size()) : inst.weights, {},
                     inst.kind, inst.domain};
      local.trees = protocols::build_routing_trees(local.topology, local.weights);
      const auto problem = local.problem();
      protocols::EngineOptions zero;
      zero.force_zero_delay = true;
      const auto dam = protocols::run_protocol(Protocol::kDamtogd, {problem, nullptr, local.trees, 1.0, zero});
      const auto ogd = protocols::run_protocol(Protocol::kOgd, {problem, nullptr, {}, 1.0, {}});
      if (!same_trajectory(dam, ogd)) ++failures_zero_delay;
    }
  }
  result.pass = failures_identity == 0 && failures_zero_delay == 0;
  result.detail = fmt::format("{} configs; W = I mismatches {}, zero-delay mismatches {}", configs,
                              failures_identity, failures_zero_delay);
  return result;
}

CheckResult check_steiner(std::uint64_t seed, int graphs) {
  CheckResult result{"Steiner 2-approximation", true, {}};
  double worst_ratio = 0.0;
  int violations = 0;
  for (int i = 0; i < graphs; ++i) {
    Rng rng = make_rng(seed, SeedPurpose::kProbe, 400 + static_cast<std::uint64_t>(i));
    const auto n = static_cast<std::size_t>(uniform_int(rng, 4, 8));
    const auto topo = graph::build_topology(n, {graph::GeneratorSpec::Kind::kErdosRenyi, uniform(rng, 0.25, 0.6)},
                                            rng());
    const auto root = static_cast<AgentId>(uniform_int(rng, 0, static_cast<int>(n) - 1));
    std::vector<AgentId> terminals;
    const int count = uniform_int(rng, 1, 4);
    while (static_cast<int>(terminals.size()) < count) {
      const auto t = static_cast<AgentId>(uniform_int(rng, 0, static_cast<int>(n) - 1));
      if (std::find(terminals.begin(), terminals.end(), t) == terminals.end()) terminals.push_back(t);
    }
    std::sort(terminals.begin(), terminals.end());

    const auto tree = graph::build_steiner_tree(topo, root, terminals);
    const auto optimum = brute_force_steiner_cost(topo, root, terminals);

    bool ok = is_tree(tree.edges);
    for (const auto& e : tree.edges) ok = ok && topo.has_edge(e.u, e.v);
    for (AgentId t : terminals) ok = ok && tree_hops(tree, t) >= 0;
    ok = ok && tree.cost() >= optimum && tree.cost() <= 2 * optimum;
    if (!ok) ++violations;
    if (optimum > 0) worst_ratio = std::max(worst_ratio, static_cast<double>(tree.cost()) / optimum);
  }
  result.pass = violations == 0;
  result.detail = fmt::format("{} graphs, {} violations, worst cost/optimum {:.3f}, limit 2", graphs, violations,
                              worst_ratio);
  return result;
}

CheckResult check_comparators(std::uint64_t seed, int instances) {
  CheckResult result{"hindsight comparators", true, {}};
  double worst_gap = 0.0;
  double worst_improvement = -std::numeric_limits<double>::infinity();
  int interior_cases = 0;
  for (int i = 0; i < instances; ++i) {
    Rng rng = make_rng(seed, SeedPurpose::kProbe, 500 + static_cast<std::uint64_t>(i));
    const std::size_t n = 3;
    const Round horizon = 200;
    const auto truth = datagen::gen_ground_truth(n, 3, 3, 0.75, 1.0, rng());
    const auto streams = datagen::gen_streams(truth, horizon, rng());
    const auto weights = datagen::gen_logical_weights(n, 2.0, 10.0, rng());

    // Interior DeltaNet case against the normal equations.
    {
      const LossKind kind = LossKind::with_default_map(LossVariant::kDeltaNet);
      const protocols::Problem problem{streams, kind, losses::DomainBall(1e4), &weights};
      for (AgentId a = 0; a < n; ++a) {
        const Matrix expected = deltanet_normal_equations(problem, a, horizon);
        if (!(expected.norm() < problem.domain.radius())) continue;
        ++interior_cases;
        const auto got = regret::hindsight_optimum(problem, a, horizon);
        worst_gap = std::max(worst_gap, (got.memory - expected).cwiseAbs().maxCoeff());
      }
    }

    // Local probe for every loss on a ball small enough to make some optima
    // sit on the boundary.
    for (std::size_t v = 0; v < std::size(kVariants); ++v) {
      const LossKind kind = LossKind::with_default_map(kVariants[v]);
      const auto gated_streams = datagen::gen_streams(truth, horizon, 77 + i, {kind.gated(), 0.7});
      const protocols::Problem problem{gated_streams, kind, losses::DomainBall(uniform(rng, 0.5, 20.0)), &weights};
      const AgentId a = static_cast<AgentId>(v % n);
      const auto opt = regret::hindsight_optimum(problem, a, horizon);
      auto objective = [&](const Matrix& u) {
        double total = 0.0;
        for (Round t = 1; t <= horizon; ++t) total += protocols::weighted_loss(problem, a, u, t);
        return total;
      };
      const double base = objective(opt.memory);
      for (int probe = 0; probe < 10; ++probe) {
        Matrix dir = random_matrix(rng, opt.memory.rows(), opt.memory.cols(), 1.0);
        dir /= dir.norm();
        const Matrix moved = losses::project(problem.domain, opt.memory + 1e-3 * dir);
        worst_improvement = std::max(worst_improvement, base - objective(moved));
      }
    }
  }
  result.pass = interior_cases > 0 && worst_gap <= 1e-6 && worst_improvement <= 1e-6;
  result.detail = fmt::format("{} interior cases, max |U - U_normal| {:.3g} (limit 1e-6); max probe improvement "
                              "{:.3g} (limit 1e-6)",
                              interior_cases, worst_gap, worst_improvement);
  return result;
}

bool run_selftest(std::ostream& out, std::uint64_t seed) {
  const std::vector<CheckResult> results = {
      check_gradients(seed), check_engine_replay(seed), check_reductions(seed), check_steiner(seed),
      check_comparators(seed),
  };
  bool all = true;
  for (const auto& r : results) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    all = all && r.pass;
  }
  return all;
}

}  // namespace damsim::oracles
