#include "catch_amalgamated.hpp"

#include "spherecons/graph.hpp"

#include <map>
#include <set>

using namespace spherecons;

namespace {

// Floyd-Warshall transitive closure, independent of the DFS in the library.
bool closure_strongly_connected(const DirectedGraph& g) {
  const Index n = g.size();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (Index i = 0; i < n; ++i) {
    r[i][i] = true;
    for (Index j = 0; j < n; ++j)
      if (g.has_edge(i, j)) r[i][j] = true;
  }
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (!r[i][j]) return false;
  return true;
}

DirectedGraph directed_ring3() { return DirectedGraph(3, {{0, 1}, {1, 2}, {2, 0}}); }

}  // namespace

TEST_CASE("graph construction validates edges", "[graph]") {
  CHECK_THROWS_AS(DirectedGraph(3, {{0, 3}}), InvalidArgument);
  CHECK_THROWS_AS(DirectedGraph(3, {{-1, 2}}), InvalidArgument);
  CHECK_THROWS_AS(DirectedGraph(3, {{1, 1}}), InvalidArgument);
  CHECK_THROWS_AS(DirectedGraph(0), InvalidArgument);
  const DirectedGraph g(3, {{2, 0}, {0, 1}, {0, 1}});
  CHECK(g.edge_count() == 2);
  CHECK(g.edges() == std::vector<Edge>{{0, 1}, {2, 0}});
}

TEST_CASE("strong connectivity", "[graph]") {
  CHECK(is_strongly_connected(complete_graph(4)));
  CHECK(is_strongly_connected(directed_ring3()));
  CHECK_FALSE(is_strongly_connected(DirectedGraph(2, {{0, 1}})));
  CHECK(is_strongly_connected(DirectedGraph(1)));
  CHECK_FALSE(is_strongly_connected(DirectedGraph(4, {{0, 1}, {1, 0}, {2, 3}, {3, 2}})));
}

TEST_CASE("symmetry", "[graph]") {
  CHECK(is_symmetric(ring_graph(5)));
  CHECK_FALSE(is_symmetric(directed_ring3()));
  CHECK(is_symmetric(DirectedGraph(1)));
}

TEST_CASE("complete and ring graphs", "[graph]") {
  CHECK(complete_graph(2).edges() == std::vector<Edge>{{0, 1}, {1, 0}});
  CHECK(complete_graph(3).edge_count() == 6);
  CHECK(complete_graph(1).edge_count() == 0);

  const DirectedGraph r5 = ring_graph(5);
  CHECK(r5.edge_count() == 10);
  for (Index i = 0; i < 5; ++i) {
    const auto nb = r5.out_neighbors(i);
    CHECK(nb.size() == 2);
    CHECK(r5.has_edge(i, (i + 1) % 5));
    CHECK(r5.has_edge(i, (i + 4) % 5));
  }
  CHECK(ring_graph(3) == complete_graph(3));
  CHECK_THROWS_AS(ring_graph(2), InvalidArgument);
}

TEST_CASE("random strongly connected generator", "[graph][random]") {
  const DirectedGraph cycle_only = random_strongly_connected(4, 0.0, 7);
  CHECK(cycle_only.edge_count() == 4);
  CHECK(is_strongly_connected(cycle_only));
  for (Index i = 0; i < 4; ++i) CHECK(cycle_only.out_neighbors(i).size() == 1);

  CHECK(random_strongly_connected(4, 1.0, 7) == complete_graph(4));

  const DirectedGraph g = random_strongly_connected(6, 0.3, 42);
  CHECK(closure_strongly_connected(g));
  CHECK(g.edge_count() >= 6);
  CHECK(g.edge_count() <= 30);

  CHECK(random_strongly_connected(6, 0.3, 42) == g);
  CHECK_THROWS_AS(random_strongly_connected(1, 0.5, 1), InvalidArgument);
  CHECK_THROWS_AS(random_strongly_connected(4, 1.5, 1), InvalidArgument);
}

TEST_CASE("every directed model yields strongly connected graphs", "[graph][random][property]") {
  for (auto model : {DirectedGraphModel::Cycle, DirectedGraphModel::BidirectedTree, DirectedGraphModel::ErdosRenyi})
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const Index n = 2 + static_cast<Index>(seed % 9);
      // Rejection sampling needs many draws for sparse directed G(n, p).
      const double low = model == DirectedGraphModel::ErdosRenyi ? 0.3 : 0.05;
      const double p = low + (0.95 - low) * static_cast<double>(seed % 7) / 6.0;
      const DirectedGraph g = random_strongly_connected(n, p, seed, model);
      INFO("model " << to_string(model) << " seed " << seed);
      REQUIRE(closure_strongly_connected(g));
      REQUIRE(is_strongly_connected(g));
    }
}

TEST_CASE("bidirected tree backbone has no pure directed cycle", "[graph][random]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DirectedGraph g = random_strongly_connected(5, 0.0, seed, DirectedGraphModel::BidirectedTree);
    CHECK(g.edge_count() == 8);
    CHECK(is_symmetric(g));
  }
}

TEST_CASE("every symmetric model yields connected symmetric graphs", "[graph][random][property]") {
  for (auto model : {SymmetricGraphModel::Cycle, SymmetricGraphModel::SpanningTree, SymmetricGraphModel::UniformTree,
                     SymmetricGraphModel::ErdosRenyi})
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const Index n = 2 + static_cast<Index>(seed % 9);
      const double p = 0.05 + 0.9 * static_cast<double>(seed % 5) / 4.0;
      const DirectedGraph g = random_symmetric_connected(n, p, seed, model);
      INFO("model " << to_string(model) << " seed " << seed);
      REQUIRE(is_symmetric(g));
      REQUIRE(closure_strongly_connected(g));
    }
}

TEST_CASE("tree backbones have exactly n - 1 undirected edges at p = 0", "[graph][random]") {
  for (auto model : {SymmetricGraphModel::SpanningTree, SymmetricGraphModel::UniformTree})
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Index n = 2 + static_cast<Index>(seed % 8);
      const DirectedGraph g = random_symmetric_connected(n, 0.0, seed, model);
      CHECK(g.edge_count() == 2 * (n - 1));
      CHECK(is_strongly_connected(g));
    }
}

TEST_CASE("uniform tree backbone covers every labelled tree on four nodes", "[graph][random]") {
  // Cayley: 4^2 = 16 labelled trees, each with probability 1/16.
  std::map<std::vector<Edge>, int> counts;
  const int draws = 16000;
  for (int s = 0; s < draws; ++s)
    ++counts[random_symmetric_connected(4, 0.0, static_cast<std::uint64_t>(s), SymmetricGraphModel::UniformTree).edges()];
  REQUIRE(counts.size() == 16);
  for (const auto& [edges, c] : counts) CHECK(std::abs(c - 1000) < 150);  // ~5 sigma
}

TEST_CASE("structure matrix", "[graph]") {
  const Matrix b = structure_matrix(DirectedGraph(2, {{0, 1}}));
  Matrix expected(2, 2);
  expected << 1, 1, 0, 1;
  CHECK(b == expected);
  const Matrix br = structure_matrix(ring_graph(6));
  CHECK(br == br.transpose());
  CHECK(br.diagonal().isOnes());
}

TEST_CASE("model names parse back", "[graph]") {
  for (auto m : {SymmetricGraphModel::Cycle, SymmetricGraphModel::SpanningTree, SymmetricGraphModel::UniformTree,
                 SymmetricGraphModel::ErdosRenyi})
    CHECK(parse_symmetric_model(to_string(m)) == m);
  for (auto m : {DirectedGraphModel::Cycle, DirectedGraphModel::BidirectedTree, DirectedGraphModel::ErdosRenyi})
    CHECK(parse_directed_model(to_string(m)) == m);
  CHECK_THROWS_AS(parse_symmetric_model("grid"), InvalidArgument);
}

TEST_CASE("graph fingerprint separates graphs", "[graph]") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 20; ++s) seen.insert(fingerprint(random_strongly_connected(7, 0.5, s)));
  CHECK(seen.size() == 20);
  CHECK(fingerprint(complete_graph(4)) == fingerprint(complete_graph(4)));
}
