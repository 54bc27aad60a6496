#include "bagscan/attack_graph.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <queue>
#include <set>

#include "bagscan/error.hpp"

namespace bagscan {

namespace {

constexpr std::size_t kMaxParents = 26;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void check_parents(std::span<const ParentLink> parents, double p_e) {
  if (parents.empty()) {
    throw Error(ErrorKind::InvalidModel, "CPT requested for a node without parents");
  }
  if (parents.size() > kMaxParents) {
    throw Error(ErrorKind::ResourceLimit,
                "node has " + std::to_string(parents.size()) + " parents, CPT too large");
  }
  if (!is_probability(p_e)) {
    throw Error(ErrorKind::InvalidModel, "p_e outside [0,1]");
  }
  for (const auto& link : parents) {
    if (!is_probability(link.p_v)) {
      throw Error(ErrorKind::InvalidModel, "p_v outside [0,1]");
    }
  }
}

Cpt make_cpt(NodeId node, std::span<const ParentLink> parents) {
  Cpt cpt;
  cpt.node = node;
  cpt.parent_ids.reserve(parents.size());
  for (const auto& link : parents) cpt.parent_ids.push_back(link.parent);
  cpt.table.assign(std::size_t{1} << parents.size(), 0.0);
  return cpt;
}

}  // namespace

AttackGraph::AttackGraph(std::vector<BagNode> nodes, std::vector<BagEdge> edges,
                         std::map<std::string, double> metadata)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), metadata_(std::move(metadata)) {
  const std::size_t n = nodes_.size();
  std::sort(nodes_.begin(), nodes_.end(),
            [](const BagNode& a, const BagNode& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes_[i].id != i) {
      throw Error(ErrorKind::InvalidModel, "node ids must be unique and dense in [0, n)");
    }
    if (!is_probability(nodes_[i].p_e)) {
      throw Error(ErrorKind::InvalidModel,
                  "node " + std::to_string(i) + ": p_e outside [0,1]");
    }
  }

  in_.assign(n, {});
  out_.assign(n, {});
  std::set<std::pair<NodeId, NodeId>> seen;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const BagEdge& edge = edges_[e];
    if (edge.from >= n || edge.to >= n) {
      throw Error(ErrorKind::InvalidModel,
                  "edge " + std::to_string(e) + " references an unknown node");
    }
    if (edge.from == edge.to) {
      throw Error(ErrorKind::InvalidModel,
                  "self loop on node " + std::to_string(edge.from));
    }
    if (!is_probability(edge.p_v)) {
      throw Error(ErrorKind::InvalidModel,
                  "edge " + std::to_string(e) + ": p_v outside [0,1]");
    }
    if (!seen.emplace(edge.from, edge.to).second) {
      throw Error(ErrorKind::InvalidModel, "duplicate edge " + std::to_string(edge.from) +
                                               "->" + std::to_string(edge.to));
    }
    in_[edge.to].push_back(e);
    out_[edge.from].push_back(e);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const bool has_parents = !in_[i].empty();
    if (nodes_[i].attacker_root && has_parents) {
      throw Error(ErrorKind::InvalidModel,
                  "attacker root " + std::to_string(i) + " has incoming edges");
    }
    if (!nodes_[i].attacker_root && !has_parents) {
      throw Error(ErrorKind::InvalidModel,
                  "node " + std::to_string(i) + " has no parents and is not an attacker root");
    }
  }

  // Kahn with a min-heap so the order is canonical.
  std::vector<std::size_t> indegree(n);
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    indegree[i] = in_[i].size();
    if (indegree[i] == 0) ready.push(static_cast<NodeId>(i));
  }
  topo_.reserve(n);
  while (!ready.empty()) {
    const NodeId v = ready.top();
    ready.pop();
    topo_.push_back(v);
    for (std::size_t e : out_[v]) {
      if (--indegree[edges_[e].to] == 0) ready.push(edges_[e].to);
    }
  }
  if (topo_.size() != n) {
    throw Error(ErrorKind::InvalidModel, "attack graph contains a directed cycle");
  }
}

const BagNode& AttackGraph::node(NodeId id) const {
  if (id >= nodes_.size()) {
    throw Error(ErrorKind::NotFound, "unknown node " + std::to_string(id));
  }
  return nodes_[id];
}

std::span<const std::size_t> AttackGraph::in_edges(NodeId id) const {
  node(id);
  return in_[id];
}

std::span<const std::size_t> AttackGraph::out_edges(NodeId id) const {
  node(id);
  return out_[id];
}

std::vector<NodeId> AttackGraph::parents(NodeId id) const {
  std::vector<NodeId> result;
  for (std::size_t e : in_edges(id)) result.push_back(edges_[e].from);
  return result;
}

std::vector<NodeId> AttackGraph::children(NodeId id) const {
  std::vector<NodeId> result;
  for (std::size_t e : out_edges(id)) result.push_back(edges_[e].to);
  return result;
}

std::optional<std::size_t> AttackGraph::find_edge(NodeId from, NodeId to) const {
  if (from >= nodes_.size()) return std::nullopt;
  for (std::size_t e : out_[from]) {
    if (edges_[e].to == to) return e;
  }
  return std::nullopt;
}

std::optional<NodeId> AttackGraph::find_label(const std::string& label) const {
  for (const auto& node : nodes_) {
    if (node.label == label) return node.id;
  }
  return std::nullopt;
}

Cpt build_cpt_and(NodeId node, std::span<const ParentLink> parents, double p_e) {
  check_parents(parents, p_e);
  Cpt cpt = make_cpt(node, parents);
  double product = 1.0;
  for (const auto& link : parents) product *= link.p_v;
  std::fill(cpt.table.begin(), cpt.table.end(), p_e);
  cpt.table.back() = 1.0 - (1.0 - p_e) * (1.0 - product);
  return cpt;
}

Cpt build_cpt_or(NodeId node, std::span<const ParentLink> parents, double p_e) {
  check_parents(parents, p_e);
  Cpt cpt = make_cpt(node, parents);
  // survive[mask] = prod over true parents of (1 - p_v), built from the
  // entry with the lowest set bit cleared.
  std::vector<double> survive(cpt.table.size());
  survive[0] = 1.0;
  for (std::size_t mask = 1; mask < survive.size(); ++mask) {
    const std::size_t low = mask & (~mask + 1);
    const auto bit = static_cast<std::size_t>(std::countr_zero(low));
    survive[mask] = survive[mask ^ low] * (1.0 - parents[bit].p_v);
  }
  cpt.table[0] = p_e;
  for (std::size_t mask = 1; mask < survive.size(); ++mask) {
    cpt.table[mask] = 1.0 - (1.0 - p_e) * survive[mask];
  }
  return cpt;
}

std::vector<Cpt> materialize(const AttackGraph& graph) {
  std::vector<Cpt> cpts;
  cpts.reserve(graph.size());
  std::vector<ParentLink> links;
  for (const BagNode& node : graph.nodes()) {
    if (node.attacker_root) {
      cpts.push_back(Cpt{node.id, {}, {1.0}});
      continue;
    }
    links.clear();
    for (std::size_t e : graph.in_edges(node.id)) {
      links.push_back({graph.edges()[e].from, graph.edges()[e].p_v});
    }
    cpts.push_back(node.gate == Gate::And ? build_cpt_and(node.id, links, node.p_e)
                                          : build_cpt_or(node.id, links, node.p_e));
  }
  return cpts;
}

AttackGraph patch(const AttackGraph& graph, NodeId from, NodeId to) {
  const auto edge = graph.find_edge(from, to);
  if (!edge) {
    throw Error(ErrorKind::NotFound,
                "no edge " + std::to_string(from) + "->" + std::to_string(to));
  }
  std::vector<BagEdge> edges = graph.edges();
  edges[*edge].p_v = 0.0;
  return AttackGraph(graph.nodes(), std::move(edges), graph.metadata());
}

void EvidenceSet::observe(NodeId id, bool state) {
  const auto [it, inserted] = observations_.emplace(id, state);
  if (!inserted && it->second != state) {
    throw Error(ErrorKind::InvalidEvidence,
                "contradictory observations for node " + std::to_string(id));
  }
}

std::optional<bool> EvidenceSet::state(NodeId id) const {
  const auto it = observations_.find(id);
  if (it == observations_.end()) return std::nullopt;
  return it->second;
}

EvidenceSet EvidenceSet::merged(const EvidenceSet& other) const {
  EvidenceSet result = *this;
  for (const auto& [id, state] : other.observations_) result.observe(id, state);
  return result;
}

void EvidenceSet::check_against(std::size_t num_nodes) const {
  for (const auto& [id, state] : observations_) {
    if (id >= num_nodes) {
      throw Error(ErrorKind::NotFound, "evidence on unknown node " + std::to_string(id));
    }
  }
}

}  // namespace bagscan
