#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "damsim/graph.hpp"
#include "damsim/oracles/oracles.hpp"
#include "damsim/rng.hpp"

namespace {

using namespace damsim;
using namespace damsim::graph;

Topology ring(std::size_t n) { return build_topology(n, GeneratorSpec::parse("ring"), 0); }

Topology path(std::size_t n) {
  std::vector<Edge> edges;
  for (AgentId a = 0; a + 1 < n; ++a) edges.emplace_back(a, a + 1);
  return Topology::from_edges(n, edges);
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

TEST(Topology, SmallestConnectedGraph) {
  const std::vector<Edge> edges = {{0, 1}};
  const auto topo = Topology::from_edges(2, edges);
  EXPECT_EQ(topo.edges().size(), 1u);
  EXPECT_TRUE(topo.has_edge(1, 0));
}

TEST(Topology, SingleAgentHasNoEdges) {
  const auto topo = Topology::from_edges(1, {});
  EXPECT_EQ(topo.n_agents(), 1u);
  EXPECT_TRUE(topo.edges().empty());
}

TEST(Topology, RingHasDegreeTwo) {
  const auto topo = ring(6);
  EXPECT_EQ(topo.edges().size(), 6u);
  for (AgentId a = 0; a < 6; ++a) EXPECT_EQ(topo.degree(a), 2u);
}

TEST(Topology, ErdosRenyiIsConnectedByUnionFind) {
  const auto topo = build_topology(20, GeneratorSpec::parse("erdos-renyi(0.2)"), 7);
  EXPECT_EQ(topo.n_agents(), 20u);
  EXPECT_TRUE(oracles::connected_by_union_find(20, topo.edges()));
}

TEST(Topology, GeneratorsRetryUntilConnected) {
  const auto topo = build_topology(12, GeneratorSpec::parse("erdos-renyi(0.3)"), 3);
  EXPECT_TRUE(oracles::connected_by_union_find(12, topo.edges()));
  const auto geo = build_topology(15, GeneratorSpec::parse("random-geometric(0.4)"), 5);
  EXPECT_TRUE(oracles::connected_by_union_find(15, geo.edges()));
  std::size_t total_retries = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto sparse = build_topology(10, GeneratorSpec::parse("erdos-renyi(0.25)"), s);
    EXPECT_TRUE(oracles::connected_by_union_find(10, sparse.edges()));
    total_retries += sparse.generator_retries();
  }
  EXPECT_GT(total_retries, 0u);
}

TEST(Topology, GeneratorIsDeterministic) {
  const auto a = build_topology(20, GeneratorSpec::parse("erdos-renyi(0.2)"), 7);
  const auto b = build_topology(20, GeneratorSpec::parse("erdos-renyi(0.2)"), 7);
  EXPECT_EQ(a.edges(), b.edges());
  EXPECT_EQ(a.generator_retries(), b.generator_retries());
}

TEST(Topology, RejectsBadEdgeLists) {
  EXPECT_NE(error_of([] { Topology::from_edges(3, std::vector<Edge>{{0, 1}}); }).find("unreachable"),
            std::string::npos);
  EXPECT_NE(error_of([] { Topology::from_edges(3, std::vector<Edge>{{0, 1}, {1, 1}, {1, 2}}); }).find("self-loop"),
            std::string::npos);
  EXPECT_NE(error_of([] { Topology::from_edges(3, std::vector<Edge>{{0, 1}, {1, 5}}); }).find("5"),
            std::string::npos);
  EXPECT_NE(error_of([] { Topology::from_edges(3, std::vector<Edge>{{0, 1}, {1, 0}, {1, 2}}); }).find("duplicate"),
            std::string::npos);
}

TEST(Topology, GeneratorSpecParsing) {
  EXPECT_EQ(GeneratorSpec::parse("ring").kind, GeneratorSpec::Kind::kRing);
  const auto er = GeneratorSpec::parse("erdos-renyi(0.35)");
  EXPECT_EQ(er.kind, GeneratorSpec::Kind::kErdosRenyi);
  EXPECT_DOUBLE_EQ(er.parameter, 0.35);
  EXPECT_THROW(GeneratorSpec::parse("star"), ValidationError);
  EXPECT_THROW(GeneratorSpec::parse("erdos-renyi(x)"), ValidationError);
  EXPECT_THROW(GeneratorSpec::parse("erdos-renyi(1.5)"), ValidationError);
}

TEST(EdgeList, ParsesCommentsAndWhitespace) {
  std::istringstream in("# triangle\n0 1\n  1\t2  # tail comment\n\n2 0\n");
  const auto edges = parse_edge_list(in);
  ASSERT_EQ(edges.size(), 3u);
  const auto topo = Topology::from_edges(3, edges);
  EXPECT_EQ(topo.degree(0), 2u);
}

TEST(EdgeList, RejectsMalformedLines) {
  std::istringstream bad("0 1\n1 x\n");
  EXPECT_NE(error_of([&] { parse_edge_list(bad); }).find("line 2"), std::string::npos);
}

TEST(HopDistances, SelfNeighborAntipode) {
  const auto topo = ring(6);
  const auto d = hop_distances(topo, 2);
  EXPECT_EQ(d[2], 0u);
  EXPECT_EQ(d[3], 1u);
  EXPECT_EQ(d[1], 1u);
  EXPECT_EQ(d[5], 3u);
}

TEST(HopDistances, TriangleInequality) {
  const auto topo = build_topology(15, GeneratorSpec::parse("erdos-renyi(0.25)"), 11);
  std::vector<std::vector<std::size_t>> d;
  for (AgentId a = 0; a < 15; ++a) d.push_back(hop_distances(topo, a));
  for (AgentId a = 0; a < 15; ++a) {
    for (AgentId b = 0; b < 15; ++b) {
      EXPECT_EQ(d[a][b], d[b][a]);
      for (AgentId c = 0; c < 15; ++c) EXPECT_LE(d[a][c], d[a][b] + d[b][c]);
    }
  }
}

TEST(Steiner, RootOnlyHasNoEdges) {
  const auto topo = ring(6);
  const std::vector<AgentId> terminals = {3};
  const auto tree = build_steiner_tree(topo, 3, terminals);
  EXPECT_TRUE(tree.edges.empty());
  EXPECT_EQ(tree.nodes(), std::vector<AgentId>{3});
}

TEST(Steiner, NeighborGivesDirectLink) {
  const auto topo = ring(6);
  const std::vector<AgentId> terminals = {1};
  const auto tree = build_steiner_tree(topo, 0, terminals);
  ASSERT_EQ(tree.edges.size(), 1u);
  EXPECT_EQ(tree.edges.front(), Edge(0, 1));
}

TEST(Steiner, PathToFollowsTree) {
  const auto topo = path(5);
  const std::vector<AgentId> terminals = {4};
  const auto tree = build_steiner_tree(topo, 1, terminals);
  const auto p = tree.path_to(4);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(*p, (std::vector<AgentId>{1, 2, 3, 4}));
  EXPECT_FALSE(tree.path_to(0).has_value());
}

TEST(Steiner, SixNodeThreeTerminalsWithinApproximationFactor) {
  const std::vector<Edge> edges = {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {1, 5}, {5, 3}, {5, 4}, {2, 5}};
  const auto topo = Topology::from_edges(6, edges);
  const std::vector<AgentId> terminals = {3, 4};
  const auto tree = build_steiner_tree(topo, 0, terminals);
  const auto optimum = oracles::brute_force_steiner_cost(topo, 0, terminals);
  const double l = 3.0;  // |{root} u terminals| bounds the leaf count of any tree on them
  EXPECT_TRUE(oracles::is_tree(tree.edges));
  EXPECT_LE(static_cast<double>(tree.cost()), 2.0 * (1.0 - 1.0 / l) * static_cast<double>(optimum) + 1e-12);
}

TEST(Steiner, PropertyRandomSmallGraphs) {
  for (std::uint64_t s = 0; s < 120; ++s) {
    Rng rng = make_rng(s, SeedPurpose::kProbe, 1);
    const std::size_t n = 3 + rng() % 6;  // 3..8
    const auto topo = build_topology(n, {GeneratorSpec::Kind::kErdosRenyi, 0.35}, rng());
    const auto root = static_cast<AgentId>(rng() % n);
    std::vector<AgentId> terminals;
    const std::size_t k = 1 + rng() % 4;
    for (std::size_t i = 0; i < k; ++i) terminals.push_back(static_cast<AgentId>(rng() % n));
    std::sort(terminals.begin(), terminals.end());
    terminals.erase(std::unique(terminals.begin(), terminals.end()), terminals.end());

    const auto tree = build_steiner_tree(topo, root, terminals);
    const auto nodes = tree.nodes();
    // |E| = |V| - 1 and acyclic.
    EXPECT_EQ(tree.edges.size() + 1, nodes.size());
    EXPECT_TRUE(oracles::is_tree(tree.edges));
    EXPECT_TRUE(std::binary_search(nodes.begin(), nodes.end(), root));
    for (const auto& e : tree.edges) EXPECT_TRUE(topo.has_edge(e.u, e.v));
    for (AgentId t : terminals) EXPECT_GE(oracles::tree_hops(tree, t), 0);
    // Every leaf is the root or a terminal.
    for (AgentId a : nodes) {
      const auto degree = std::count_if(tree.edges.begin(), tree.edges.end(),
                                        [&](const Edge& e) { return e.u == a || e.v == a; });
      if (degree == 1) {
        EXPECT_TRUE(a == root || std::binary_search(terminals.begin(), terminals.end(), a)) << "seed " << s;
      }
    }
    const auto optimum = oracles::brute_force_steiner_cost(topo, root, terminals);
    EXPECT_LE(tree.cost(), 2 * optimum) << "seed " << s;
  }
}

TEST(Steiner, DeterministicTieBreaking) {
  const auto topo = ring(8);
  const std::vector<AgentId> terminals = {4};
  const auto a = build_steiner_tree(topo, 0, terminals);
  const auto b = build_steiner_tree(topo, 0, terminals);
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_EQ(a.cost(), 4u);
}

TEST(Delays, SelfNeighborAndPath) {
  const auto topo = path(4);  // 0 - 1 - 2 - 3
  std::vector<RoutingTree> trees;
  for (AgentId n = 0; n < 4; ++n) {
    std::vector<AgentId> all = {0, 1, 2, 3};
    trees.push_back(build_steiner_tree(topo, n, all));
  }
  const auto delays = derive_delays(trees);
  EXPECT_EQ(delays.round_trip(2, 2), 0);
  EXPECT_EQ(delays.one_way(0, 1), 1);
  EXPECT_EQ(delays.round_trip(0, 1), 2);
  EXPECT_EQ(delays.one_way(0, 3), 3);
  EXPECT_EQ(delays.round_trip(0, 3), 6);
  for (AgentId n = 0; n < 4; ++n) {
    for (AgentId m = 0; m < 4; ++m) {
      EXPECT_EQ(delays.one_way(n, m), oracles::tree_hops(trees[n], m));
      EXPECT_EQ(delays.round_trip(n, m), 2 * delays.one_way(n, m));
    }
  }
}

TEST(Delays, UnreachableWithPositiveWeightIsStructuralError) {
  const auto topo = path(3);
  std::vector<RoutingTree> trees;
  for (AgentId n = 0; n < 3; ++n) {
    std::vector<AgentId> self = {n};
    trees.push_back(build_steiner_tree(topo, n, self));
  }
  const Matrix identity = Matrix::Identity(3, 3);
  const auto ok = derive_delays(trees, &identity);
  EXPECT_EQ(ok.one_way(0, 2), DelayTable::kUnreachable);

  Matrix w = Matrix::Identity(3, 3);
  w(0, 0) = 0.5;
  w(0, 2) = 0.5;
  EXPECT_THROW(derive_delays(trees, &w), ValidationError);
}

TEST(Delays, ZeroTable) {
  const auto z = DelayTable::zero(3);
  for (AgentId n = 0; n < 3; ++n) {
    for (AgentId m = 0; m < 3; ++m) EXPECT_EQ(z.round_trip(n, m), 0);
  }
}

}  // namespace
