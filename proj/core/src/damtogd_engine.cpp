#include <algorithm>

#include <fmt/format.h>

#include "damsim/protocols.hpp"
#include "protocols_detail.hpp"

namespace damsim::protocols {

DamTogdEngine::DamTogdEngine(const Problem& problem, std::span<const graph::RoutingTree> trees, double c,
                             EngineOptions options)
    : problem_(problem), delays_(problem.n_agents()), options_(options) {
  problem_.validate();
  const std::size_t n_agents = problem_.n_agents();
  if (!(c > 0.0)) throw ValidationError("learning-rate scale c must be positive");

  if (options_.force_zero_delay) {
    delays_ = graph::DelayTable::zero(n_agents);
  } else {
    if (trees.size() != n_agents) {
      throw ValidationError(fmt::format("{} routing trees for {} agents", trees.size(), n_agents));
    }
    delays_ = graph::derive_delays(trees, &problem_.weights->matrix());
  }

  routes_.assign(n_agents, std::vector<std::vector<AgentId>>(n_agents));
  schedule_ = {Protocol::kDamtogd, c, std::vector<int>(n_agents, 0)};
  for (AgentId n = 0; n < n_agents; ++n) {
    int tau_min = -1;
    for (AgentId m : problem_.weights->support(n)) {
      const int tau = delays_.round_trip(n, m);
      tau_min = tau_min < 0 ? tau : std::min(tau_min, tau);
      if (m == n) continue;
      if (options_.force_zero_delay) {
        routes_[n][m] = {n, m};
      } else {
        auto path = trees[n].path_to(m);
        if (!path) {
          throw EngineError(fmt::format("agent {} missing from routing tree {}", m, n));
        }
        routes_[n][m] = std::move(*path);
      }
    }
    schedule_.tau_min[n] = std::max(tau_min, 0);
  }

  iterates_.assign(n_agents, Matrix::Zero(problem_.value_dim(), problem_.key_dim()));
  inbox_.resize(n_agents);
}

void DamTogdEngine::deliver_iterate(const IterateMessage& msg) {
  // The terminal evaluates its own loss of the round the snapshot was sent
  // and returns the gradient along the same route.
  GradientMessage reply;
  reply.evaluator = msg.destination;
  reply.target = msg.origin;
  reply.payload = losses::loss_gradient(problem_.kind, *msg.payload, problem_.data(msg.destination, msg.sent_at));
  reply.data_round = msg.sent_at;
  reply.route = msg.route;
  reply.position = msg.position;
  reply.hops_remaining = static_cast<std::size_t>(delays_.one_way(msg.origin, msg.destination));
  if (reply.hops_remaining == 0) {
    deliver_gradient(std::move(reply));
  } else {
    gradient_msgs_.push_back(std::move(reply));
  }
}

void DamTogdEngine::deliver_gradient(GradientMessage msg) { inbox_[msg.target].push_back(std::move(msg)); }

void DamTogdEngine::advance_in_flight() {
  std::vector<GradientMessage> still_gradients;
  still_gradients.reserve(gradient_msgs_.size());
  for (auto& msg : gradient_msgs_) {
    --msg.hops_remaining;
    if (msg.position > 0) --msg.position;
    if (msg.hops_remaining == 0) {
      deliver_gradient(std::move(msg));
    } else {
      still_gradients.push_back(std::move(msg));
    }
  }
  gradient_msgs_ = std::move(still_gradients);

  std::vector<IterateMessage> still_iterates;
  still_iterates.reserve(iterate_msgs_.size());
  for (auto& msg : iterate_msgs_) {
    --msg.hops_remaining;
    ++msg.position;
    if (msg.hops_remaining == 0) {
      deliver_iterate(msg);
    } else {
      still_iterates.push_back(std::move(msg));
    }
  }
  iterate_msgs_ = std::move(still_iterates);
}

void DamTogdEngine::broadcast() {
  for (AgentId n = 0; n < iterates_.size(); ++n) {
    const auto& support = problem_.weights->support(n);
    if (support.size() <= 1 && (support.empty() || support.front() == n)) continue;
    auto snapshot = std::make_shared<const Matrix>(iterates_[n]);
    for (AgentId m : support) {
      if (m == n) continue;
      IterateMessage msg;
      msg.origin = n;
      msg.destination = m;
      msg.payload = snapshot;
      msg.sent_at = round_;
      msg.route = &routes_[n][m];
      msg.position = 0;
      msg.hops_remaining = static_cast<std::size_t>(delays_.one_way(n, m));
      if (msg.hops_remaining == 0) {
        deliver_iterate(msg);
      } else {
        iterate_msgs_.push_back(std::move(msg));
      }
    }
  }
}

void DamTogdEngine::update() {
  const Round t = round_;
  std::vector<Matrix> next;
  next.reserve(iterates_.size());

  for (AgentId n = 0; n < iterates_.size(); ++n) {
    const auto& support = problem_.weights->support(n);
    auto& inbox = inbox_[n];

    std::vector<const GradientMessage*> by_evaluator(iterates_.size(), nullptr);
    for (const auto& msg : inbox) {
      const int tau = delays_.round_trip(n, msg.evaluator);
      const bool expected = msg.evaluator != n && (*problem_.weights)(n, msg.evaluator) > 0.0 && tau >= 0 &&
                            t > static_cast<Round>(tau) && msg.data_round == t - static_cast<Round>(tau);
      if (!expected || by_evaluator[msg.evaluator] != nullptr) {
        throw EngineError(fmt::format("unexpected gradient at agent {} from agent {} for data round {} (t = {})",
                                      n, msg.evaluator, msg.data_round, t));
      }
      by_evaluator[msg.evaluator] = &msg;
    }

    Matrix acc = Matrix::Zero(iterates_[n].rows(), iterates_[n].cols());
    for (AgentId m : support) {
      const double w = (*problem_.weights)(n, m);
      if (m == n) {
        detail::accumulate(acc, w, losses::loss_gradient(problem_.kind, iterates_[n], problem_.data(n, t)));
        continue;
      }
      const auto tau = static_cast<Round>(delays_.round_trip(n, m));
      if (t <= tau) continue;  // indicator off: no term
      const GradientMessage* msg = by_evaluator[m];
      if (msg == nullptr) {
        throw EngineError(fmt::format("missing gradient at agent {} from agent {} (t = {})", n, m, t));
      }
      detail::accumulate(acc, w, msg->payload);
      if (observer_) observer_({n, m, msg->data_round, t});
    }

    const double eta = learning_rate(schedule_, n, t);
    next.push_back(detail::descend(problem_.domain, iterates_[n], eta, acc));
    inbox.clear();
  }
  iterates_ = std::move(next);
}

void DamTogdEngine::step() {
  advance_in_flight();
  broadcast();
  update();
  ++round_;
}

}  // namespace damsim::protocols
