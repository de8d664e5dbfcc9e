#pragma once

// Physical communication topology, hop metrics, Steiner routing trees and the
// delay tables they induce.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "damsim/types.hpp"

namespace damsim::graph {

/// Undirected edge, stored with u < v.
struct Edge {
  AgentId u = 0;
  AgentId v = 0;

  Edge() = default;
  Edge(AgentId a, AgentId b) : u(a < b ? a : b), v(a < b ? b : a) {}

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Random-graph families used when no explicit edge list is given.
struct GeneratorSpec {
  enum class Kind { kRing, kErdosRenyi, kRandomGeometric };

  Kind kind = Kind::kErdosRenyi;
  double parameter = 0.2;  // p for Erdos-Renyi, radius for random-geometric

  /// Accepts "ring", "erdos-renyi(0.2)", "random-geometric(0.35)".
  static GeneratorSpec parse(std::string_view text);
  std::string to_string() const;
};

/// Connected, simple, undirected graph over agents [0, n).
class Topology {
 public:
  /// Validates and builds from an explicit edge list. Throws ValidationError
  /// naming the offending edge (self-loop, duplicate, out of range) or the
  /// first agent unreachable from agent 0.
  static Topology from_edges(std::size_t n_agents, std::span<const Edge> edges);

  std::size_t n_agents() const { return adjacency_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Neighbours of `a` in ascending order.
  const std::vector<AgentId>& neighbors(AgentId a) const { return adjacency_.at(a); }
  std::size_t degree(AgentId a) const { return adjacency_.at(a).size(); }
  bool has_edge(AgentId a, AgentId b) const;

  /// Number of rejected (disconnected) draws before a generator succeeded.
  std::size_t generator_retries() const { return retries_; }

 private:
  friend Topology build_topology(std::size_t, const GeneratorSpec&, std::uint64_t);

  std::vector<Edge> edges_;
  std::vector<std::vector<AgentId>> adjacency_;
  std::size_t retries_ = 0;
};

/// Draws from a generator family, retrying with an incremented sub-seed until
/// the draw is connected.
Topology build_topology(std::size_t n_agents, const GeneratorSpec& spec, std::uint64_t seed);

/// Parses the edge-list text format: one "u v" pair per line, 0-based,
/// '#' starts a comment.
std::vector<Edge> parse_edge_list(std::istream& in);
std::vector<Edge> read_edge_list(const std::string& path);

/// Breadth-first hop counts from `source`.
std::vector<std::size_t> hop_distances(const Topology& topo, AgentId source);

/// A tree inside the topology rooted at one agent and spanning a terminal set.
struct RoutingTree {
  AgentId root = 0;
  std::vector<AgentId> terminals;  // sorted, unique
  std::vector<Edge> edges;         // sorted

  /// Agents touched by the tree (root included), sorted.
  std::vector<AgentId> nodes() const;
  /// Agent sequence root -> target along the tree, or nullopt if unreachable.
  std::optional<std::vector<AgentId>> path_to(AgentId target) const;
  std::size_t cost() const { return edges.size(); }
};

/// Kou-Markowsky-Berman 2-approximate Steiner tree over the hop metric. The
/// root is always part of the tree. Ties are broken by (min endpoint,
/// max endpoint) so the result is platform independent.
RoutingTree build_steiner_tree(const Topology& topo, AgentId root,
                               std::span<const AgentId> terminals);

/// One-way hop counts and round-trip delays per (root, terminal) pair.
class DelayTable {
 public:
  static constexpr int kUnreachable = -1;

  explicit DelayTable(std::size_t n_agents);

  std::size_t n_agents() const { return n_; }
  /// Hops from n to m along tree n, or kUnreachable.
  int one_way(AgentId n, AgentId m) const { return one_way_[n * n_ + m]; }
  /// Round-trip delay, twice the one-way hop count.
  int round_trip(AgentId n, AgentId m) const;
  void set_one_way(AgentId n, AgentId m, int hops) { one_way_[n * n_ + m] = hops; }

  /// Zero delay for every pair.
  static DelayTable zero(std::size_t n_agents);

 private:
  std::size_t n_;
  std::vector<int> one_way_;
};

/// Builds the delay table from one tree per agent (trees[n].root == n). If
/// `weights` is given, a pair with positive weight whose terminal is missing
/// from the tree is a structural error.
DelayTable derive_delays(std::span<const RoutingTree> trees, const Matrix* weights = nullptr);

}  // namespace damsim::graph
