#include "damsim/oracles/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <queue>

#include <boost/pending/disjoint_sets.hpp>

namespace damsim::oracles {

using losses::FeatureMap;
using losses::LossVariant;

Matrix finite_difference_gradient(const losses::LossKind& kind, const Matrix& x, const losses::DataPoint& d,
                                  double h) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      probe(i, j) = x(i, j) + h;
      const double up = losses::loss_value(kind, probe, d);
      probe(i, j) = x(i, j) - h;
      const double down = losses::loss_value(kind, probe, d);
      probe(i, j) = x(i, j);
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

double gradient_relative_error(const Matrix& analytic, const Matrix& numeric) {
  const double diff = (analytic - numeric).norm();
  const double scale = analytic.norm();
  return scale > 0.0 ? diff / scale : diff;
}

double scalar_loop_loss(const losses::LossKind& kind, const Matrix& x, const losses::DataPoint& d) {
  const auto rows = x.rows();
  const auto cols = x.cols();

  std::vector<double> phi(static_cast<std::size_t>(cols));
  const bool softmax = kind.variant == LossVariant::kSoftmaxNoNorm || kind.variant == LossVariant::kSoftmaxWithNorm ||
                       kind.variant == LossVariant::kGatedSoftmax;
  const FeatureMap map = softmax ? kind.feature_map : FeatureMap::kIdentity;
  if (map == FeatureMap::kIdentity) {
    for (Eigen::Index j = 0; j < cols; ++j) phi[j] = d.key(j);
  } else if (map == FeatureMap::kElementwiseExp) {
    for (Eigen::Index j = 0; j < cols; ++j) phi[j] = std::exp(d.key(j));
  } else {
    double top = d.key(0);
    for (Eigen::Index j = 1; j < cols; ++j) top = std::max(top, d.key(j));
    double total = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      phi[j] = std::exp(d.key(j) - top);
      total += phi[j];
    }
    for (auto& p : phi) p /= total;
  }

  // <X phi, v> and ||X phi - v||^2
  double inner = 0.0;
  double residual = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    double readout = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) readout += x(i, j) * phi[j];
    inner += readout * d.value(i);
    residual += (readout - d.value(i)) * (readout - d.value(i));
  }

  auto masked_frobenius = [&](bool use_gate) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double keep = use_gate ? 1.0 - d.gate(i) : 1.0;
      for (Eigen::Index j = 0; j < cols; ++j) s += keep * x(i, j) * x(i, j);
    }
    return 0.5 * s;
  };

  switch (kind.variant) {
    case LossVariant::kLinearAttention:
    case LossVariant::kSoftmaxNoNorm:
      return -inner;
    case LossVariant::kGatedLinearAttention:
    case LossVariant::kGatedSoftmax:
      return -inner + masked_frobenius(true);
    case LossVariant::kDeltaNet:
      return 0.5 * residual;
    case LossVariant::kSoftmaxWithNorm:
      return -inner + masked_frobenius(false);
  }
  return 0.0;
}

bool connected_by_union_find(std::size_t n, std::span<const graph::Edge> edges) {
  if (n == 0) return true;
  std::vector<std::size_t> rank(n);
  std::vector<std::size_t> parent(n);
  boost::disjoint_sets<std::size_t*, std::size_t*> sets(rank.data(), parent.data());
  for (std::size_t i = 0; i < n; ++i) sets.make_set(i);
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) return false;
    sets.union_set(e.u, e.v);
  }
  const std::size_t root = sets.find_set(0);
  for (std::size_t i = 1; i < n; ++i) {
    if (sets.find_set(i) != root) return false;
  }
  return true;
}

bool is_tree(std::span<const graph::Edge> edges) {
  if (edges.empty()) return true;
  std::vector<AgentId> nodes;
  for (const auto& e : edges) {
    nodes.push_back(e.u);
    nodes.push_back(e.v);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  if (edges.size() != nodes.size() - 1) return false;

  auto index = [&](AgentId a) {
    return static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), a) - nodes.begin());
  };
  std::vector<graph::Edge> relabeled;
  for (const auto& e : edges) relabeled.emplace_back(index(e.u), index(e.v));
  return connected_by_union_find(nodes.size(), relabeled);
}

std::size_t brute_force_steiner_cost(const graph::Topology& topo, AgentId root, std::span<const AgentId> terminals) {
  const std::size_t n = topo.n_agents();
  std::uint64_t required = std::uint64_t{1} << root;
  for (AgentId t : terminals) required |= std::uint64_t{1} << t;

  std::size_t best = n;  // any spanning tree has n - 1 edges
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    if ((mask & required) != required) continue;
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size - 1 >= best) continue;
    std::vector<graph::Edge> induced;
    std::vector<AgentId> members;
    for (AgentId a = 0; a < n; ++a) {
      if (mask >> a & 1) members.push_back(a);
    }
    for (const auto& e : topo.edges()) {
      if ((mask >> e.u & 1) && (mask >> e.v & 1)) {
        const auto iu = std::lower_bound(members.begin(), members.end(), e.u) - members.begin();
        const auto iv = std::lower_bound(members.begin(), members.end(), e.v) - members.begin();
        induced.emplace_back(static_cast<AgentId>(iu), static_cast<AgentId>(iv));
      }
    }
    if (connected_by_union_find(members.size(), induced)) best = size - 1;
  }
  return best;
}

int tree_hops(const graph::RoutingTree& tree, AgentId target) {
  if (target == tree.root) return 0;
  std::vector<AgentId> seen{tree.root};
  std::queue<std::pair<AgentId, int>> queue;
  queue.emplace(tree.root, 0);
  while (!queue.empty()) {
    const auto [a, dist] = queue.front();
    queue.pop();
    for (const auto& e : tree.edges) {
      AgentId next;
      if (e.u == a) {
        next = e.v;
      } else if (e.v == a) {
        next = e.u;
      } else {
        continue;
      }
      if (std::find(seen.begin(), seen.end(), next) != seen.end()) continue;
      if (next == target) return dist + 1;
      seen.push_back(next);
      queue.emplace(next, dist + 1);
    }
  }
  return -1;
}

std::vector<std::vector<Matrix>> replay_damtogd(const protocols::Problem& problem,
                                                std::span<const graph::RoutingTree> trees, double c,
                                                bool zero_delay) {
  const std::size_t n_agents = problem.n_agents();
  const Round horizon = problem.horizon();
  const auto& w = problem.weights->matrix();

  // tau[n][m], -1 where w_nm == 0.
  std::vector<std::vector<int>> tau(n_agents, std::vector<int>(n_agents, -1));
  std::vector<int> tau_min(n_agents, 0);
  for (AgentId n = 0; n < n_agents; ++n) {
    int lowest = -1;
    for (AgentId m = 0; m < n_agents; ++m) {
      if (!(w(n, m) > 0.0)) continue;
      tau[n][m] = (zero_delay || m == n) ? 0 : 2 * tree_hops(trees[n], m);
      lowest = lowest < 0 ? tau[n][m] : std::min(lowest, tau[n][m]);
    }
    tau_min[n] = std::max(lowest, 0);
  }

  std::vector<std::vector<Matrix>> x(horizon, std::vector<Matrix>(n_agents));
  for (AgentId n = 0; n < n_agents; ++n) x[0][n] = Matrix::Zero(problem.value_dim(), problem.key_dim());

  for (Round t = 1; t < horizon; ++t) {
    for (AgentId n = 0; n < n_agents; ++n) {
      Matrix acc = Matrix::Zero(x[0][n].rows(), x[0][n].cols());
      for (AgentId m = 0; m < n_agents; ++m) {
        if (tau[n][m] < 0) continue;
        const auto delay = static_cast<Round>(tau[n][m]);
        if (m != n && t <= delay) continue;
        const Round source = t - delay;
        acc += w(n, m) * losses::loss_gradient(problem.kind, x[source - 1][n], problem.data(m, source));
      }
      const double eta =
          t <= static_cast<Round>(tau_min[n]) ? c : c / std::sqrt(static_cast<double>(t) - static_cast<double>(tau_min[n]));
      x[t][n] = losses::project(problem.domain, x[t - 1][n] - eta * acc);
    }
  }
  return x;
}

Matrix deltanet_normal_equations(const protocols::Problem& problem, AgentId n, Round horizon) {
  const auto dk = problem.key_dim();
  const auto dv = problem.value_dim();
  Matrix kk = Matrix::Zero(dk, dk);
  Matrix vk = Matrix::Zero(dv, dk);
  const auto& w = problem.weights->matrix();
  for (AgentId m = 0; m < problem.n_agents(); ++m) {
    if (!(w(n, m) > 0.0)) continue;
    for (Round t = 1; t <= horizon; ++t) {
      const auto& d = problem.data(m, t);
      kk += w(n, m) * d.key * d.key.transpose();
      vk += w(n, m) * d.value * d.key.transpose();
    }
  }
  // U kk = vk  <=>  kk U^T = vk^T (kk symmetric)
  return kk.ldlt().solve(vk.transpose()).transpose();
}

}  // namespace damsim::oracles
