#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bagscan/attack_graph.hpp"
#include "bagscan/generators.hpp"
#include "bagscan/graph_io.hpp"

#ifndef BAGSCAN_DATA_DIR
#define BAGSCAN_DATA_DIR "data"
#endif

namespace bagscan::testing {

inline AttackGraph example_graph() {
  return read_graph_file(std::string(BAGSCAN_DATA_DIR) + "/example_network.json");
}

inline NodeId id_of(const AttackGraph& g, const std::string& label) {
  return *g.find_label(label);
}

inline std::vector<std::vector<NodeId>> undirected_adjacency(const AttackGraph& g) {
  std::vector<std::vector<NodeId>> adj(g.size());
  for (const auto& e : g.edges()) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  return adj;
}

inline std::vector<std::size_t> bfs_distances(const std::vector<std::vector<NodeId>>& adj, NodeId from) {
  std::vector<std::size_t> dist(adj.size(), SIZE_MAX);
  std::deque<NodeId> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    NodeId v = queue.front();
    queue.pop_front();
    for (NodeId w : adj[v])
      if (dist[w] == SIZE_MAX) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
  }
  return dist;
}

// Longest shortest path of the undirected skeleton (connected graphs only).
inline std::size_t diameter(const AttackGraph& g) {
  auto adj = undirected_adjacency(g);
  std::size_t best = 0;
  for (NodeId v = 0; v < g.size(); ++v) {
    auto d = bfs_distances(adj, v);
    for (auto x : d)
      if (x != SIZE_MAX) best = std::max(best, x);
  }
  return best;
}

// Node sequence of the unique path between a and b in a tree skeleton.
inline std::vector<NodeId> tree_path(const std::vector<std::vector<NodeId>>& adj, NodeId a, NodeId b) {
  std::vector<NodeId> prev(adj.size(), NodeId(-1));
  std::deque<NodeId> queue{a};
  prev[a] = a;
  while (!queue.empty()) {
    NodeId v = queue.front();
    queue.pop_front();
    for (NodeId w : adj[v])
      if (prev[w] == NodeId(-1)) {
        prev[w] = v;
        queue.push_back(w);
      }
  }
  std::vector<NodeId> path{b};
  while (path.back() != a) path.push_back(prev[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

inline double random_pv(Rng& rng) { return 0.05 + 0.9 * rng.uniform01(); }

inline Gate random_gate(Rng& rng) { return rng.bernoulli(0.5) ? Gate::And : Gate::Or; }

// Random undirected tree oriented along a random ranking: a polytree whose
// parentless nodes become attacker roots.
struct Polytree {
  std::vector<std::pair<NodeId, NodeId>> edges;  // directed
  std::vector<std::size_t> rank;
};

inline Polytree random_polytree(std::size_t n, Rng& rng) {
  Polytree t;
  t.rank.resize(n);
  std::iota(t.rank.begin(), t.rank.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(t.rank[i - 1], t.rank[rng.uniform_int(0, i - 1)]);
  for (NodeId v = 1; v < n; ++v) {
    NodeId u = NodeId(rng.uniform_int(0, v - 1));
    if (t.rank[u] < t.rank[v]) t.edges.emplace_back(u, v);
    else t.edges.emplace_back(v, u);
  }
  return t;
}

inline AttackGraph assemble(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges, Rng& rng) {
  std::vector<bool> has_parent(n, false);
  for (auto [a, b] : edges) has_parent[b] = true;
  std::vector<BagNode> nodes;
  for (NodeId v = 0; v < n; ++v)
    nodes.push_back({v, "n" + std::to_string(v), random_gate(rng), !has_parent[v], 0.0});
  std::vector<BagEdge> out;
  for (auto [a, b] : edges) out.push_back({a, b, random_pv(rng)});
  return AttackGraph(std::move(nodes), std::move(out));
}

inline AttackGraph random_tree_bag(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto t = random_polytree(n, rng);
  return assemble(n, t.edges, rng);
}

struct SingleLoop {
  AttackGraph graph;
  // Non-root node on the loop; observing it true cuts the loop.
  NodeId cut = 0;
};

// Polytree plus one edge a->b, which closes exactly one loop through b's
// factor. Candidates for the cut are the non-root nodes on the tree path
// between a and b's other parent; b itself must not lie on that path.
inline SingleLoop random_single_loop(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  for (;;) {
    auto t = random_polytree(n, rng);
    NodeId a = NodeId(rng.uniform_int(0, n - 1));
    NodeId b = NodeId(rng.uniform_int(0, n - 1));
    if (a == b || t.rank[a] > t.rank[b]) continue;
    std::optional<NodeId> other;
    bool adjacent = false;
    for (auto [u, v] : t.edges) {
      if ((u == a && v == b) || (u == b && v == a)) adjacent = true;
      if (v == b) other = u;
    }
    if (adjacent || !other) continue;
    auto edges = t.edges;
    edges.emplace_back(a, b);
    std::vector<bool> has_parent(n, false);
    for (auto [u, v] : edges) has_parent[v] = true;

    std::vector<std::vector<NodeId>> adj(n);
    for (auto [u, v] : t.edges) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    auto path = tree_path(adj, a, *other);
    if (std::find(path.begin(), path.end(), b) != path.end()) continue;
    std::vector<NodeId> candidates;
    for (NodeId v : path)
      if (has_parent[v]) candidates.push_back(v);
    if (candidates.empty()) continue;
    NodeId cut = candidates[rng.uniform_int(0, candidates.size() - 1)];
    return {assemble(n, edges, rng), cut};
  }
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace bagscan::testing
