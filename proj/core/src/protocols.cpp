#include "damsim/protocols.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "protocols_detail.hpp"

namespace damsim::protocols {

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::kOgd: return "ogd";
    case Protocol::kCdogd: return "cdogd";
    case Protocol::kDamtogd: return "damtogd";
  }
  return "?";
}

Protocol parse_protocol(std::string_view name) {
  for (auto p : {Protocol::kOgd, Protocol::kCdogd, Protocol::kDamtogd}) {
    if (to_string(p) == name) return p;
  }
  throw ValidationError(fmt::format("unknown protocol '{}'", name));
}

Round Problem::horizon() const {
  Round t = streams.empty() ? 0 : streams.front().size();
  for (const auto& s : streams) t = std::min<Round>(t, s.size());
  return t;
}

void Problem::validate() const {
  if (streams.empty()) throw ValidationError("problem has no agents");
  if (weights == nullptr) throw ValidationError("problem has no logical weights");
  if (weights->n_agents() != streams.size()) {
    throw ValidationError(fmt::format("logical weights cover {} agents but {} streams were given",
                                      weights->n_agents(), streams.size()));
  }
  if (horizon() == 0) throw ValidationError("streams are empty");
  kind.validate();
  const auto dk = key_dim();
  const auto dv = value_dim();
  for (std::size_t m = 0; m < streams.size(); ++m) {
    for (const auto& d : streams[m]) {
      if (d.key.size() != dk || d.value.size() != dv || (kind.gated() && d.gate.size() != dv)) {
        throw ValidationError(fmt::format("stream of agent {} has inconsistent dimensions", m));
      }
    }
  }
}

double weighted_loss(const Problem& problem, AgentId n, const Matrix& x, Round t) {
  double total = 0.0;
  for (AgentId m : problem.weights->support(n)) {
    total += (*problem.weights)(n, m) * losses::loss_value(problem.kind, x, problem.data(m, t));
  }
  return total;
}

double learning_rate(const ScheduleParams& params, AgentId agent, Round t) {
  if (t == 0) throw ValidationError("rounds start at 1");
  const double td = static_cast<double>(t);
  switch (params.variant) {
    case Protocol::kOgd:
      return 1.0 / std::sqrt(td);
    case Protocol::kCdogd:
      return 1.0 / (2.0 * std::sqrt(td));
    case Protocol::kDamtogd: {
      if (!(params.c > 0.0)) throw ValidationError("learning-rate scale c must be positive");
      const int tau_min = agent < params.tau_min.size() ? params.tau_min[agent] : 0;
      if (t <= static_cast<Round>(std::max(tau_min, 0))) return params.c;
      return params.c / std::sqrt(td - static_cast<double>(tau_min));
    }
  }
  return 0.0;
}

Matrix ogd_step(const Problem& problem, AgentId n, const Matrix& x, Round t) {
  Matrix acc = Matrix::Zero(x.rows(), x.cols());
  for (AgentId m : problem.weights->support(n)) {
    detail::accumulate(acc, (*problem.weights)(n, m), losses::loss_gradient(problem.kind, x, problem.data(m, t)));
  }
  const double eta = learning_rate({Protocol::kOgd, 1.0, {}}, n, t);
  return detail::descend(problem.domain, x, eta, acc);
}

std::vector<Matrix> cdogd_step(const Problem& problem, const datagen::MixingMatrix& mixing,
                               std::span<const Matrix> states, Round t) {
  if (states.size() != problem.n_agents()) {
    throw ValidationError(fmt::format("{} states for {} agents", states.size(), problem.n_agents()));
  }
  const double eta = learning_rate({Protocol::kCdogd, 1.0, {}}, 0, t);
  std::vector<Matrix> next;
  next.reserve(states.size());
  for (AgentId n = 0; n < states.size(); ++n) {
    Matrix mixed = Matrix::Zero(states[n].rows(), states[n].cols());
    for (AgentId m : mixing.support(n)) mixed += mixing(n, m) * states[m];
    const Matrix grad = losses::loss_gradient(problem.kind, states[n], problem.data(n, t));
    next.push_back(losses::project(problem.domain, mixed - eta * grad));
  }
  return next;
}

std::vector<graph::RoutingTree> build_routing_trees(const graph::Topology& topo,
                                                    const datagen::LogicalWeights& weights) {
  if (weights.n_agents() != topo.n_agents()) {
    throw ValidationError("topology and logical weights disagree on the number of agents");
  }
  std::vector<graph::RoutingTree> trees;
  trees.reserve(topo.n_agents());
  for (AgentId n = 0; n < topo.n_agents(); ++n) {
    trees.push_back(graph::build_steiner_tree(topo, n, weights.support(n)));
  }
  return trees;
}

RunHistory run_protocol(Protocol protocol, const RunInputs& inputs) {
  const Problem& problem = inputs.problem;
  problem.validate();
  const std::size_t n_agents = problem.n_agents();
  const Round horizon = problem.horizon();

  RunHistory history;
  history.protocol = protocol;
  history.n_agents = n_agents;
  history.horizon = horizon;
  history.iterates.reserve(n_agents * horizon);
  history.round_loss.resize(static_cast<Eigen::Index>(horizon), static_cast<Eigen::Index>(n_agents));

  auto record = [&](const std::vector<Matrix>& states, Round t) {
    for (AgentId n = 0; n < n_agents; ++n) {
      history.iterates.push_back(states[n]);
      history.round_loss(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(n)) =
          weighted_loss(problem, n, states[n], t);
    }
  };

  const Matrix zero = Matrix::Zero(problem.value_dim(), problem.key_dim());

  switch (protocol) {
    case Protocol::kOgd: {
      std::vector<Matrix> states(n_agents, zero);
      for (Round t = 1; t <= horizon; ++t) {
        record(states, t);
        if (t == horizon) break;
        for (AgentId n = 0; n < n_agents; ++n) states[n] = ogd_step(problem, n, states[n], t);
      }
      break;
    }
    case Protocol::kCdogd: {
      if (inputs.mixing == nullptr) throw ValidationError("C-DOGD needs a mixing matrix");
      if (static_cast<std::size_t>(inputs.mixing->matrix().rows()) != n_agents) {
        throw ValidationError("mixing matrix size does not match the number of agents");
      }
      std::vector<Matrix> states(n_agents, zero);
      for (Round t = 1; t <= horizon; ++t) {
        record(states, t);
        if (t == horizon) break;
        states = cdogd_step(problem, *inputs.mixing, states, t);
      }
      break;
    }
    case Protocol::kDamtogd: {
      DamTogdEngine engine(problem, inputs.trees, inputs.c, inputs.engine);
      for (Round t = 1; t <= horizon; ++t) {
        record(engine.iterates(), t);
        if (t == horizon) break;
        engine.step();
      }
      break;
    }
  }
  return history;
}

}  // namespace damsim::protocols
