#pragma once

// Directed graphs on nodes {0..n-1}. External formats (JSON, CSV) use 1-based
// node labels; everything in this header is 0-based.

#include "spherecons/common.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spherecons {

struct Edge {
  Index from = 0;
  Index to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed graph without self-loops. Immutable once built.
class DirectedGraph {
 public:
  explicit DirectedGraph(Index n, const std::vector<Edge>& edges = {}) : n_(n) {
    require(n >= 1, "graph needs at least one node");
    adj_.assign(static_cast<std::size_t>(n * n), 0);
    for (const Edge& e : edges) {
      require(e.from >= 0 && e.from < n && e.to >= 0 && e.to < n,
              "edge endpoint outside {1.." + std::to_string(n) + "}");
      require(e.from != e.to, "self-loop on node " + std::to_string(e.from + 1));
      adj_[slot(e.from, e.to)] = 1;
    }
  }

  Index size() const noexcept { return n_; }

  bool has_edge(Index i, Index j) const { return adj_[slot(i, j)] != 0; }

  /// Edges in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (Index i = 0; i < n_; ++i)
      for (Index j = 0; j < n_; ++j)
        if (has_edge(i, j)) out.push_back({i, j});
    return out;
  }

  Index edge_count() const {
    return static_cast<Index>(std::count(adj_.begin(), adj_.end(), std::uint8_t{1}));
  }

  std::vector<Index> out_neighbors(Index i) const {
    std::vector<Index> out;
    for (Index j = 0; j < n_; ++j)
      if (has_edge(i, j)) out.push_back(j);
    return out;
  }

  friend bool operator==(const DirectedGraph&, const DirectedGraph&) = default;

 private:
  std::size_t slot(Index i, Index j) const { return static_cast<std::size_t>(i * n_ + j); }

  Index n_;
  std::vector<std::uint8_t> adj_;
};

namespace detail {
inline std::vector<char> reachable(const DirectedGraph& g, Index start, bool reverse) {
  const Index n = g.size();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Index> stack{start};
  seen[static_cast<std::size_t>(start)] = 1;
  while (!stack.empty()) {
    const Index u = stack.back();
    stack.pop_back();
    for (Index v = 0; v < n; ++v) {
      const bool arc = reverse ? g.has_edge(v, u) : g.has_edge(u, v);
      if (arc && !seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        stack.push_back(v);
      }
    }
  }
  return seen;
}
}  // namespace detail

/// True iff node 0 reaches every node and every node reaches node 0, i.e. the
/// graph is a single strongly connected component.
inline bool is_strongly_connected(const DirectedGraph& g) {
  auto all = [](const std::vector<char>& s) { return std::all_of(s.begin(), s.end(), [](char c) { return c != 0; }); };
  return all(detail::reachable(g, 0, false)) && all(detail::reachable(g, 0, true));
}

inline bool is_symmetric(const DirectedGraph& g) {
  for (Index i = 0; i < g.size(); ++i)
    for (Index j = i + 1; j < g.size(); ++j)
      if (g.has_edge(i, j) != g.has_edge(j, i)) return false;
  return true;
}

inline DirectedGraph complete_graph(Index n) {
  require(n >= 1, "complete_graph: n must be >= 1");
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j) edges.push_back({i, j});
  return DirectedGraph(n, edges);
}

/// Undirected ring: i <-> i+1 (mod n) in both directions.
inline DirectedGraph ring_graph(Index n) {
  require(n >= 3, "ring_graph: n must be >= 3");
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i) {
    const Index next = (i + 1) % n;
    edges.push_back({i, next});
    edges.push_back({next, i});
  }
  return DirectedGraph(n, edges);
}

/// How a random strongly connected digraph is generated.
enum class DirectedGraphModel {
  Cycle,        // directed Hamiltonian cycle backbone + each other ordered pair w.p. p
  BidirectedTree,  // random recursive tree, both directions + each other ordered pair w.p. p
  ErdosRenyi,   // each ordered pair w.p. p, resampled until strongly connected
};

inline std::string_view to_string(DirectedGraphModel m) {
  switch (m) {
    case DirectedGraphModel::Cycle: return "cycle";
    case DirectedGraphModel::BidirectedTree: return "tree";
    case DirectedGraphModel::ErdosRenyi: return "erdos-renyi";
  }
  return "?";
}

inline DirectedGraphModel parse_directed_model(std::string_view s) {
  if (s == "cycle") return DirectedGraphModel::Cycle;
  if (s == "tree") return DirectedGraphModel::BidirectedTree;
  if (s == "erdos-renyi" || s == "er") return DirectedGraphModel::ErdosRenyi;
  throw InvalidArgument("unknown directed graph model '" + std::string(s) + "'");
}

/// Random strongly connected digraph. The backbone is drawn first over a
/// uniform node permutation; every remaining ordered pair is then added
/// independently with probability `edge_prob`.
inline DirectedGraph random_strongly_connected(Index n, double edge_prob, std::uint64_t seed,
                                               DirectedGraphModel model = DirectedGraphModel::Cycle) {
  require(n >= 2, "random_strongly_connected: n must be >= 2");
  require(edge_prob >= 0.0 && edge_prob <= 1.0, "edge probability must lie in [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto N = static_cast<std::size_t>(n);
  std::vector<std::uint8_t> on(N * N, 0);

  auto add_extras_and_assemble = [&] {
    std::vector<Edge> edges;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const bool backbone = on[static_cast<std::size_t>(i * n + j)] != 0;
        // Draw for every off-backbone pair so the stream layout does not depend on p.
        const bool extra = !backbone && unit(rng) < edge_prob;
        if (backbone || extra) edges.push_back({i, j});
      }
    return DirectedGraph(n, edges);
  };

  if (model == DirectedGraphModel::ErdosRenyi) {
    require(edge_prob > 0.0, "erdos-renyi model needs p > 0 to be strongly connected");
    for (;;) {
      DirectedGraph g = add_extras_and_assemble();
      if (is_strongly_connected(g)) return g;
    }
  }

  std::vector<Index> perm(N);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  if (model == DirectedGraphModel::Cycle) {
    for (Index k = 0; k < n; ++k) on[static_cast<std::size_t>(perm[k] * n + perm[(k + 1) % n])] = 1;
  } else {
    for (Index k = 1; k < n; ++k) {
      const Index parent = perm[std::uniform_int_distribution<Index>(0, k - 1)(rng)];
      on[static_cast<std::size_t>(perm[k] * n + parent)] = 1;
      on[static_cast<std::size_t>(parent * n + perm[k])] = 1;
    }
  }
  return add_extras_and_assemble();
}

/// How a random connected symmetric graph is generated.
enum class SymmetricGraphModel {
  Cycle,        // symmetric Hamiltonian cycle backbone + extra undirected edges w.p. p
  SpanningTree, // uniform random recursive tree backbone + extra undirected edges w.p. p
  UniformTree,  // uniform labelled tree (Pruefer code) backbone + extra undirected edges w.p. p
  ErdosRenyi,   // G(n, p) resampled until connected
};

inline std::string_view to_string(SymmetricGraphModel m) {
  switch (m) {
    case SymmetricGraphModel::Cycle: return "cycle";
    case SymmetricGraphModel::SpanningTree: return "tree";
    case SymmetricGraphModel::UniformTree: return "uniform-tree";
    case SymmetricGraphModel::ErdosRenyi: return "erdos-renyi";
  }
  return "?";
}

inline SymmetricGraphModel parse_symmetric_model(std::string_view s) {
  if (s == "cycle") return SymmetricGraphModel::Cycle;
  if (s == "tree") return SymmetricGraphModel::SpanningTree;
  if (s == "uniform-tree") return SymmetricGraphModel::UniformTree;
  if (s == "erdos-renyi" || s == "er") return SymmetricGraphModel::ErdosRenyi;
  throw InvalidArgument("unknown symmetric graph model '" + std::string(s) + "'");
}

/// Random connected undirected graph, stored with both edge directions.
inline DirectedGraph random_symmetric_connected(Index n, double edge_prob, std::uint64_t seed,
                                                SymmetricGraphModel model) {
  require(n >= 2, "random_symmetric_connected: n must be >= 2");
  require(edge_prob >= 0.0 && edge_prob <= 1.0, "edge probability must lie in [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto N = static_cast<std::size_t>(n);
  std::vector<std::uint8_t> on(N * N, 0);
  auto link = [&](Index a, Index b) {
    on[static_cast<std::size_t>(a * n + b)] = 1;
    on[static_cast<std::size_t>(b * n + a)] = 1;
  };

  auto assemble = [&] {
    std::vector<Edge> edges;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (on[static_cast<std::size_t>(i * n + j)]) edges.push_back({i, j});
    return DirectedGraph(n, edges);
  };

  if (model == SymmetricGraphModel::ErdosRenyi) {
    require(edge_prob > 0.0, "erdos-renyi model needs p > 0 to be connected");
    for (;;) {
      std::fill(on.begin(), on.end(), std::uint8_t{0});
      for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
          if (unit(rng) < edge_prob) link(i, j);
      DirectedGraph g = assemble();
      if (is_strongly_connected(g)) return g;
    }
  }

  std::vector<Index> perm(N);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  if (model == SymmetricGraphModel::Cycle) {
    if (n == 2) {
      link(perm[0], perm[1]);
    } else {
      for (Index k = 0; k < n; ++k) link(perm[k], perm[(k + 1) % n]);
    }
  } else if (model == SymmetricGraphModel::SpanningTree) {
    for (Index k = 1; k < n; ++k) {
      std::uniform_int_distribution<Index> parent(0, k - 1);
      link(perm[k], perm[parent(rng)]);
    }
  } else if (n == 2) {
    link(0, 1);
  } else {
    // Decode a uniform Pruefer sequence.
    std::uniform_int_distribution<Index> node(0, n - 1);
    std::vector<Index> code(N - 2);
    for (Index& c : code) c = node(rng);
    std::vector<Index> degree(N, 1);
    for (Index c : code) ++degree[static_cast<std::size_t>(c)];
    for (Index c : code) {
      Index leaf = 0;
      while (degree[static_cast<std::size_t>(leaf)] != 1) ++leaf;
      link(leaf, c);
      --degree[static_cast<std::size_t>(leaf)];
      --degree[static_cast<std::size_t>(c)];
    }
    Index u = -1;
    for (Index v = 0; v < n; ++v)
      if (degree[static_cast<std::size_t>(v)] == 1) {
        if (u < 0) u = v;
        else link(u, v);
      }
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const bool backbone = on[static_cast<std::size_t>(i * n + j)] != 0;
      const bool extra = !backbone && unit(rng) < edge_prob;
      if (extra) link(i, j);
    }
  return assemble();
}

/// B(G): 1 on every edge and on the diagonal, 0 elsewhere.
inline Matrix structure_matrix(const DirectedGraph& g) {
  const Index n = g.size();
  Matrix b = Matrix::Identity(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (g.has_edge(i, j)) b(i, j) = 1.0;
  return b;
}

/// FNV-1a over (n, edge list).
inline std::uint64_t fingerprint(const DirectedGraph& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(g.size()));
  for (const Edge& e : g.edges()) {
    mix(static_cast<std::uint64_t>(e.from));
    mix(static_cast<std::uint64_t>(e.to));
  }
  return h;
}

}  // namespace spherecons
