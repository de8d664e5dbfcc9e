#pragma once

// Online learners over a network of associative memories:
//   * full-information OGD (every agent sees every loss, no delay),
//   * consensus C-DOGD (neighbour averaging plus a local gradient step),
//   * DAM-TOGD (weighted OGD on delayed cross-agent gradients that travel
//     over per-agent Steiner trees), driven by a round-stepped message engine.

#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "damsim/datagen.hpp"
#include "damsim/graph.hpp"
#include "damsim/losses.hpp"
#include "damsim/types.hpp"

namespace damsim::protocols {

enum class Protocol { kOgd, kCdogd, kDamtogd };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view name);

/// Everything a learner reads: per-agent streams, the loss, the feasible set
/// and the logical weights. Non-owning; the referenced data must outlive it.
struct Problem {
  std::span<const datagen::Stream> streams;
  losses::LossKind kind;
  losses::DomainBall domain;
  const datagen::LogicalWeights* weights = nullptr;

  std::size_t n_agents() const { return streams.size(); }
  /// Shortest stream length.
  Round horizon() const;
  Eigen::Index key_dim() const { return streams.front().front().key.size(); }
  Eigen::Index value_dim() const { return streams.front().front().value.size(); }
  const losses::DataPoint& data(AgentId m, Round t) const { return streams[m][t - 1]; }

  /// Throws ValidationError on inconsistent agent counts or dimensions.
  void validate() const;
};

/// sum_m w(n, m) f_{m,t}(X), summed over the support of row n in ascending m.
double weighted_loss(const Problem& problem, AgentId n, const Matrix& x, Round t);

struct ScheduleParams {
  Protocol variant = Protocol::kOgd;
  double c = 1.0;                 // DAM-TOGD scale
  std::vector<int> tau_min;       // DAM-TOGD, per agent
};

/// 1/sqrt(t) for OGD, 1/(2 sqrt(t)) for C-DOGD, c/sqrt(t - tau_min) for
/// DAM-TOGD (c while t <= tau_min).
double learning_rate(const ScheduleParams& params, AgentId agent, Round t);

/// Full-information update of agent n from X_{n,t}.
Matrix ogd_step(const Problem& problem, AgentId n, const Matrix& x, Round t);

/// Synchronous consensus update of all agents from their round-t states.
std::vector<Matrix> cdogd_step(const Problem& problem, const datagen::MixingMatrix& mixing,
                               std::span<const Matrix> states, Round t);

/// Iterate snapshot travelling from its origin toward one terminal of the
/// origin's tree. Relays forward it without reading the payload.
struct IterateMessage {
  AgentId origin = 0;
  AgentId destination = 0;
  std::shared_ptr<const Matrix> payload;
  Round sent_at = 0;
  std::size_t hops_remaining = 0;
  const std::vector<AgentId>* route = nullptr;  // origin ... destination
  std::size_t position = 0;                     // index of the current holder
};

/// Gradient of the evaluator's round-`data_round` loss at the origin's
/// snapshot, travelling back along the reverse route.
struct GradientMessage {
  AgentId evaluator = 0;
  AgentId target = 0;
  Matrix payload;
  Round data_round = 0;
  std::size_t hops_remaining = 0;
  const std::vector<AgentId>* route = nullptr;
  std::size_t position = 0;
};

/// Emitted when an agent consumes a remote gradient in its update.
struct DeliveryRecord {
  AgentId target = 0;
  AgentId evaluator = 0;
  Round data_round = 0;
  Round consumed_at = 0;
};

struct EngineOptions {
  /// Test hook: deliver every message instantly (tau == 0 for all pairs).
  bool force_zero_delay = false;
};

/// Steiner tree per agent over the support of its logical-weight row.
std::vector<graph::RoutingTree> build_routing_trees(const graph::Topology& topo,
                                                    const datagen::LogicalWeights& weights);

/// Round-stepped DAM-TOGD simulation. At round t every agent holds X_{n,t};
/// step() advances in-flight messages one hop, lets terminals evaluate
/// arrived snapshots, broadcasts the current iterates and applies the update
/// that yields X_{n,t+1}.
class DamTogdEngine {
 public:
  DamTogdEngine(const Problem& problem, std::span<const graph::RoutingTree> trees, double c,
                EngineOptions options = {});

  Round round() const { return round_; }
  const std::vector<Matrix>& iterates() const { return iterates_; }
  const graph::DelayTable& delays() const { return delays_; }
  const ScheduleParams& schedule() const { return schedule_; }
  std::size_t in_flight() const { return iterate_msgs_.size() + gradient_msgs_.size(); }

  void set_observer(std::function<void(const DeliveryRecord&)> observer) { observer_ = std::move(observer); }

  void step();

 private:
  void deliver_iterate(const IterateMessage& msg);
  void deliver_gradient(GradientMessage msg);
  void advance_in_flight();
  void broadcast();
  void update();

  const Problem& problem_;
  graph::DelayTable delays_;
  ScheduleParams schedule_;
  EngineOptions options_;
  // routes_[n][m]: agent sequence n ... m along tree n (empty when m not in it).
  std::vector<std::vector<std::vector<AgentId>>> routes_;
  std::vector<Matrix> iterates_;
  std::vector<IterateMessage> iterate_msgs_;
  std::vector<GradientMessage> gradient_msgs_;
  std::vector<std::vector<GradientMessage>> inbox_;
  std::function<void(const DeliveryRecord&)> observer_;
  Round round_ = 1;
};

/// Iterates X_{n,t} for t = 1..T and the weighted losses they incurred.
struct RunHistory {
  Protocol protocol = Protocol::kOgd;
  std::size_t n_agents = 0;
  Round horizon = 0;
  std::vector<Matrix> iterates;  // index (t - 1) * N + n
  Matrix round_loss;             // (T x N), sum_m w(n, m) f_{m,t}(X_{n,t})

  const Matrix& iterate(AgentId n, Round t) const { return iterates[(t - 1) * n_agents + n]; }
};

struct RunInputs {
  Problem problem;
  const datagen::MixingMatrix* mixing = nullptr;  // required by C-DOGD
  std::span<const graph::RoutingTree> trees;      // required by DAM-TOGD
  double c = 1.0;
  EngineOptions engine;
};

/// Runs T rounds from X_1 = 0. The last stored iterate is X_{n,T}.
RunHistory run_protocol(Protocol protocol, const RunInputs& inputs);

}  // namespace damsim::protocols
