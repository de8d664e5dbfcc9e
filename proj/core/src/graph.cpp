#include "damsim/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>
#include <cctype>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <fmt/format.h>

#include "damsim/rng.hpp"

namespace damsim::graph {
namespace {

constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kMaxGeneratorRetries = 10000;

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::vector<std::vector<AgentId>> adjacency_of(std::size_t n, std::span<const Edge> edges) {
  std::vector<std::vector<AgentId>> adj(n);
  for (const auto& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

// BFS over an adjacency structure; parents follow the lowest-id discovery.
void bfs(const std::vector<std::vector<AgentId>>& adj, AgentId source,
         std::vector<std::size_t>& dist, std::vector<AgentId>& parent) {
  dist.assign(adj.size(), kUnvisited);
  parent.assign(adj.size(), source);
  std::deque<AgentId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const AgentId a = queue.front();
    queue.pop_front();
    for (AgentId b : adj[a]) {
      if (dist[b] != kUnvisited) continue;
      dist[b] = dist[a] + 1;
      parent[b] = a;
      queue.push_back(b);
    }
  }
}

bool is_connected(std::size_t n, std::span<const Edge> edges) {
  if (n == 0) return false;
  DisjointSet ds(n);
  std::size_t components = n;
  for (const auto& e : edges) {
    if (ds.unite(e.u, e.v)) --components;
  }
  return components == 1;
}

std::vector<Edge> draw_edges(std::size_t n, const GeneratorSpec& spec, Rng& rng) {
  std::vector<Edge> edges;
  switch (spec.kind) {
    case GeneratorSpec::Kind::kRing:
      if (n == 2) {
        edges.emplace_back(0, 1);
      } else if (n > 2) {
        for (AgentId a = 0; a < n; ++a) edges.emplace_back(a, (a + 1) % n);
      }
      break;
    case GeneratorSpec::Kind::kErdosRenyi: {
      boost::random::bernoulli_distribution<double> coin(spec.parameter);
      for (AgentId a = 0; a < n; ++a) {
        for (AgentId b = a + 1; b < n; ++b) {
          if (coin(rng)) edges.emplace_back(a, b);
        }
      }
      break;
    }
    case GeneratorSpec::Kind::kRandomGeometric: {
      boost::random::uniform_01<double> unit;
      std::vector<std::pair<double, double>> pos(n);
      for (auto& p : pos) {
        p.first = unit(rng);
        p.second = unit(rng);
      }
      const double r2 = spec.parameter * spec.parameter;
      for (AgentId a = 0; a < n; ++a) {
        for (AgentId b = a + 1; b < n; ++b) {
          const double dx = pos[a].first - pos[b].first;
          const double dy = pos[a].second - pos[b].second;
          if (dx * dx + dy * dy <= r2) edges.emplace_back(a, b);
        }
      }
      break;
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace

GeneratorSpec GeneratorSpec::parse(std::string_view text) {
  auto trimmed = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trimmed(text);
  if (text == "ring") return {Kind::kRing, 0.0};

  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    throw ValidationError(fmt::format("unknown topology generator '{}'", text));
  }
  const auto name = trimmed(text.substr(0, open));
  const std::string arg(trimmed(text.substr(open + 1, text.size() - open - 2)));
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(arg, &used);
    if (used != arg.size()) throw std::invalid_argument(arg);
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("topology generator parameter '{}' is not a number", arg));
  }

  GeneratorSpec spec;
  if (name == "erdos-renyi") {
    if (!(value > 0.0 && value <= 1.0)) {
      throw ValidationError("erdos-renyi edge probability must be in (0, 1]");
    }
    spec = {Kind::kErdosRenyi, value};
  } else if (name == "random-geometric") {
    if (!(value > 0.0)) throw ValidationError("random-geometric radius must be positive");
    spec = {Kind::kRandomGeometric, value};
  } else {
    throw ValidationError(fmt::format("unknown topology generator '{}'", name));
  }
  return spec;
}

std::string GeneratorSpec::to_string() const {
  switch (kind) {
    case Kind::kRing: return "ring";
    case Kind::kErdosRenyi: return fmt::format("erdos-renyi({})", parameter);
    case Kind::kRandomGeometric: return fmt::format("random-geometric({})", parameter);
  }
  return "?";
}

Topology Topology::from_edges(std::size_t n_agents, std::span<const Edge> edges) {
  if (n_agents == 0) throw ValidationError("topology needs at least one agent");

  std::vector<Edge> sorted;
  sorted.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.u == e.v) throw ValidationError(fmt::format("self-loop at agent {}", e.u));
    if (e.v >= n_agents) {
      throw ValidationError(
          fmt::format("edge ({}, {}) references agent {} outside [0, {})", e.u, e.v, e.v, n_agents));
    }
    sorted.push_back(e);
  }
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
    throw ValidationError(fmt::format("duplicate edge ({}, {})", dup->u, dup->v));
  }

  Topology topo;
  topo.adjacency_ = adjacency_of(n_agents, sorted);
  topo.edges_ = std::move(sorted);

  std::vector<std::size_t> dist;
  std::vector<AgentId> parent;
  bfs(topo.adjacency_, 0, dist, parent);
  for (AgentId a = 0; a < n_agents; ++a) {
    if (dist[a] == kUnvisited) {
      throw ValidationError(fmt::format("topology is disconnected: agent {} unreachable from 0", a));
    }
  }
  return topo;
}

bool Topology::has_edge(AgentId a, AgentId b) const {
  const auto& list = adjacency_.at(a);
  return std::binary_search(list.begin(), list.end(), b);
}

Topology build_topology(std::size_t n_agents, const GeneratorSpec& spec, std::uint64_t seed) {
  if (n_agents == 0) throw ValidationError("topology needs at least one agent");
  for (std::size_t attempt = 0; attempt < kMaxGeneratorRetries; ++attempt) {
    Rng rng = make_rng(seed, SeedPurpose::kTopology, attempt);
    auto edges = draw_edges(n_agents, spec, rng);
    if (!is_connected(n_agents, edges)) continue;
    Topology topo = Topology::from_edges(n_agents, edges);
    topo.retries_ = attempt;
    return topo;
  }
  throw ValidationError(fmt::format("generator {} produced no connected graph on {} agents after {} draws",
                                    spec.to_string(), n_agents, kMaxGeneratorRetries));
}

std::vector<Edge> parse_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    long long u = 0;
    long long v = 0;
    if (!(fields >> u)) continue;  // blank or comment-only
    std::string extra;
    if (!(fields >> v) || (fields >> extra) || u < 0 || v < 0) {
      throw ValidationError(fmt::format("edge list line {}: expected two non-negative agent ids", lineno));
    }
    edges.emplace_back(static_cast<AgentId>(u), static_cast<AgentId>(v));
    if (u == v) throw ValidationError(fmt::format("edge list line {}: self-loop at agent {}", lineno, u));
  }
  return edges;
}

std::vector<Edge> read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open edge list '{}'", path));
  return parse_edge_list(in);
}

std::vector<std::size_t> hop_distances(const Topology& topo, AgentId source) {
  if (source >= topo.n_agents()) {
    throw ValidationError(fmt::format("source agent {} out of range", source));
  }
  std::vector<std::size_t> dist;
  std::vector<AgentId> parent;
  std::vector<std::vector<AgentId>> adj(topo.n_agents());
  for (AgentId a = 0; a < topo.n_agents(); ++a) adj[a] = topo.neighbors(a);
  bfs(adj, source, dist, parent);
  return dist;
}

std::vector<AgentId> RoutingTree::nodes() const {
  std::vector<AgentId> out{root};
  for (const auto& e : edges) {
    out.push_back(e.u);
    out.push_back(e.v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<std::vector<AgentId>> RoutingTree::path_to(AgentId target) const {
  if (target == root) return std::vector<AgentId>{root};
  // Walk the (small) tree from the root.
  std::vector<std::pair<AgentId, AgentId>> stack{{root, root}};
  std::vector<std::pair<AgentId, AgentId>> parent_of;  // (node, parent)
  while (!stack.empty()) {
    auto [node, parent] = stack.back();
    stack.pop_back();
    parent_of.emplace_back(node, parent);
    if (node == target) break;
    for (const auto& e : edges) {
      AgentId next;
      if (e.u == node) {
        next = e.v;
      } else if (e.v == node) {
        next = e.u;
      } else {
        continue;
      }
      if (next != parent) stack.emplace_back(next, node);
    }
  }
  if (parent_of.empty() || parent_of.back().first != target) return std::nullopt;

  std::vector<AgentId> path{target};
  AgentId cur = target;
  while (cur != root) {
    auto it = std::find_if(parent_of.begin(), parent_of.end(),
                           [cur](const auto& p) { return p.first == cur; });
    cur = it->second;
    path.push_back(cur);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

RoutingTree build_steiner_tree(const Topology& topo, AgentId root, std::span<const AgentId> terminals) {
  const std::size_t n = topo.n_agents();
  if (root >= n) throw ValidationError(fmt::format("root agent {} out of range", root));

  std::vector<AgentId> required{root};
  for (AgentId t : terminals) {
    if (t >= n) throw ValidationError(fmt::format("terminal agent {} out of range", t));
    required.push_back(t);
  }
  std::sort(required.begin(), required.end());
  required.erase(std::unique(required.begin(), required.end()), required.end());

  RoutingTree tree;
  tree.root = root;
  tree.terminals.assign(terminals.begin(), terminals.end());
  std::sort(tree.terminals.begin(), tree.terminals.end());
  tree.terminals.erase(std::unique(tree.terminals.begin(), tree.terminals.end()), tree.terminals.end());
  if (required.size() == 1) return tree;

  std::vector<std::vector<AgentId>> adj(n);
  for (AgentId a = 0; a < n; ++a) adj[a] = topo.neighbors(a);

  // Metric closure over the required set.
  const std::size_t k = required.size();
  std::vector<std::vector<std::size_t>> dist(k);
  std::vector<std::vector<AgentId>> parent(k);
  for (std::size_t i = 0; i < k; ++i) bfs(adj, required[i], dist[i], parent[i]);

  struct ClosureEdge {
    std::size_t weight;
    std::size_t i;
    std::size_t j;
  };
  std::vector<ClosureEdge> closure;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) closure.push_back({dist[i][required[j]], i, j});
  }
  // required is sorted, so (i, j) order equals (min endpoint, max endpoint) order.
  std::stable_sort(closure.begin(), closure.end(), [](const ClosureEdge& a, const ClosureEdge& b) {
    return std::tie(a.weight, a.i, a.j) < std::tie(b.weight, b.i, b.j);
  });

  // MST of the closure, each chosen edge expanded to its shortest path.
  std::vector<Edge> expanded;
  DisjointSet closure_sets(k);
  for (const auto& ce : closure) {
    if (!closure_sets.unite(ce.i, ce.j)) continue;
    AgentId cur = required[ce.j];
    while (cur != required[ce.i]) {
      const AgentId prev = parent[ce.i][cur];
      expanded.emplace_back(prev, cur);
      cur = prev;
    }
  }
  std::sort(expanded.begin(), expanded.end());
  expanded.erase(std::unique(expanded.begin(), expanded.end()), expanded.end());

  // Spanning tree of the expanded subgraph (unit weights, lexicographic ties).
  std::vector<Edge> spanning;
  DisjointSet sub_sets(n);
  for (const auto& e : expanded) {
    if (sub_sets.unite(e.u, e.v)) spanning.push_back(e);
  }

  // Prune non-required leaves until none remain.
  std::vector<bool> is_required(n, false);
  for (AgentId r : required) is_required[r] = true;
  bool pruned = true;
  while (pruned) {
    pruned = false;
    std::vector<std::size_t> degree(n, 0);
    for (const auto& e : spanning) {
      ++degree[e.u];
      ++degree[e.v];
    }
    auto removable = [&](const Edge& e) {
      return (degree[e.u] == 1 && !is_required[e.u]) || (degree[e.v] == 1 && !is_required[e.v]);
    };
    const auto before = spanning.size();
    spanning.erase(std::remove_if(spanning.begin(), spanning.end(), removable), spanning.end());
    pruned = spanning.size() != before;
  }

  tree.edges = std::move(spanning);
  return tree;
}

DelayTable::DelayTable(std::size_t n_agents) : n_(n_agents), one_way_(n_agents * n_agents, kUnreachable) {
  for (AgentId a = 0; a < n_; ++a) one_way_[a * n_ + a] = 0;
}

int DelayTable::round_trip(AgentId n, AgentId m) const {
  const int hops = one_way(n, m);
  return hops == kUnreachable ? kUnreachable : 2 * hops;
}

DelayTable DelayTable::zero(std::size_t n_agents) {
  DelayTable table(n_agents);
  std::fill(table.one_way_.begin(), table.one_way_.end(), 0);
  return table;
}

DelayTable derive_delays(std::span<const RoutingTree> trees, const Matrix* weights) {
  const std::size_t n = trees.size();
  if (weights != nullptr && (static_cast<std::size_t>(weights->rows()) != n ||
                             static_cast<std::size_t>(weights->cols()) != n)) {
    throw ValidationError(fmt::format("weight matrix is {}x{} but {} trees were given", weights->rows(),
                                      weights->cols(), n));
  }
  DelayTable table(n);
  for (AgentId root = 0; root < n; ++root) {
    const RoutingTree& tree = trees[root];
    if (tree.root != root) {
      throw ValidationError(fmt::format("tree {} is rooted at agent {}", root, tree.root));
    }
    // Depth of every tree node by BFS over the tree edges.
    std::vector<std::vector<AgentId>> adj(n);
    for (const auto& e : tree.edges) {
      if (e.v >= n) throw ValidationError(fmt::format("tree {} references agent {}", root, e.v));
      adj[e.u].push_back(e.v);
      adj[e.v].push_back(e.u);
    }
    std::vector<std::size_t> depth;
    std::vector<AgentId> parent;
    bfs(adj, root, depth, parent);
    for (AgentId m = 0; m < n; ++m) {
      if (depth[m] != kUnvisited) table.set_one_way(root, m, static_cast<int>(depth[m]));
    }
    if (weights != nullptr) {
      for (AgentId m = 0; m < n; ++m) {
        if ((*weights)(root, m) > 0.0 && depth[m] == kUnvisited) {
          throw ValidationError(fmt::format(
              "agent {} has weight {} in row {} but is not reachable in tree {}", m, (*weights)(root, m),
              root, root));
        }
      }
    }
  }
  return table;
}

}  // namespace damsim::graph
