#pragma once

// Independent reference implementations used to check the core library.
// Each oracle recomputes a result by a different route (finite differences,
// scalar loops, literal recursions, exhaustive search) and never calls the
// routine it is checking.

#include <cstdint>
#include <span>
#include <vector>

#include "damsim/graph.hpp"
#include "damsim/losses.hpp"
#include "damsim/protocols.hpp"
#include "damsim/types.hpp"

namespace damsim::oracles {

/// Central finite differences of loss_value with step h, one entry at a time.
Matrix finite_difference_gradient(const losses::LossKind& kind, const Matrix& x, const losses::DataPoint& d,
                                  double h = 1e-5);

/// ||G - G_fd||_F / ||G||_F (absolute error when G == 0).
double gradient_relative_error(const Matrix& analytic, const Matrix& numeric);

/// Loss value by explicit index loops over entries of X, k, v and psi.
double scalar_loop_loss(const losses::LossKind& kind, const Matrix& x, const losses::DataPoint& d);

/// Connectivity of an edge list over [0, n) via disjoint sets.
bool connected_by_union_find(std::size_t n, std::span<const graph::Edge> edges);

/// True when the edges form a tree over exactly the nodes they touch
/// (|E| = |V| - 1 and no cycle).
bool is_tree(std::span<const graph::Edge> edges);

/// Minimum Steiner tree cost (edge count) by enumerating every node subset
/// that contains the required nodes and induces a connected subgraph.
/// Intended for graphs with at most ~16 nodes.
std::size_t brute_force_steiner_cost(const graph::Topology& topo, AgentId root, std::span<const AgentId> terminals);

/// Hop count root -> target using only the tree edges (BFS), or -1.
int tree_hops(const graph::RoutingTree& tree, AgentId target);

/// DAM-TOGD iterates computed directly from the update recursion over stored
/// histories, with no messages:
///   X_{n,t+1} = P[X_{n,t} - eta_{n,t} sum_m w_nm grad f_{m,t-tau_nm}(X_{n,t-tau_nm}) 1{t > tau_nm}]
/// with tau_nm = 2 * (hops of m in tree n), tau_nn = 0, X_{n,1} = 0 and
/// eta = c / sqrt(t - tau_min). Index [t - 1][n]. With zero_delay every tau
/// is 0.
std::vector<std::vector<Matrix>> replay_damtogd(const protocols::Problem& problem,
                                                std::span<const graph::RoutingTree> trees, double c,
                                                bool zero_delay = false);

/// Weighted least squares (sum w v k^T)(sum w k k^T)^{-1} over rounds 1..T of
/// the support of row n.
Matrix deltanet_normal_equations(const protocols::Problem& problem, AgentId n, Round horizon);

}  // namespace damsim::oracles
