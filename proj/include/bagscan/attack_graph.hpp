#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bagscan {

using NodeId = std::uint32_t;

enum class Gate { And, Or };

struct BagNode {
  NodeId id = 0;
  std::string label;
  Gate gate = Gate::Or;
  bool attacker_root = false;
  // Alert-system error rate folded into the node's CPT.
  double p_e = 0.0;

  bool operator==(const BagNode&) const = default;
};

struct BagEdge {
  NodeId from = 0;
  NodeId to = 0;
  // Probability of successfully exploiting the vulnerability behind this
  // step. Zero marks a patched vulnerability.
  double p_v = 0.0;

  bool operator==(const BagEdge&) const = default;
};

// Directed acyclic attack graph over "node compromised" conditions.
//
// Construction validates the model: ids dense in [0, n), probabilities in
// range, no self loops or duplicate edges, acyclic, and every node without
// parents is an attacker root (and vice versa). The parent order of a node
// is the order in which its incoming edges appear in the edge list; CPT rows
// are indexed by that order.
class AttackGraph {
 public:
  AttackGraph() = default;
  AttackGraph(std::vector<BagNode> nodes, std::vector<BagEdge> edges,
              std::map<std::string, double> metadata = {});

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<BagNode>& nodes() const noexcept { return nodes_; }
  const std::vector<BagEdge>& edges() const noexcept { return edges_; }
  const BagNode& node(NodeId id) const;

  // Indices into edges() of the incoming edges of `id`, in parent order.
  std::span<const std::size_t> in_edges(NodeId id) const;
  std::span<const std::size_t> out_edges(NodeId id) const;
  std::vector<NodeId> parents(NodeId id) const;
  std::vector<NodeId> children(NodeId id) const;

  std::optional<std::size_t> find_edge(NodeId from, NodeId to) const;
  std::optional<NodeId> find_label(const std::string& label) const;

  // Topological order; ties resolved by ascending id.
  const std::vector<NodeId>& topological_order() const noexcept { return topo_; }

  // Free-form numeric annotations (e.g. realized generator statistics).
  const std::map<std::string, double>& metadata() const noexcept { return metadata_; }

  bool operator==(const AttackGraph& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_ && metadata_ == other.metadata_;
  }

 private:
  std::vector<BagNode> nodes_;
  std::vector<BagEdge> edges_;
  std::map<std::string, double> metadata_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<NodeId> topo_;
};

// p(X = T | parent assignment), indexed by parent bitmask: bit k of the row
// index is the state of parent_ids[k].
struct Cpt {
  NodeId node = 0;
  std::vector<NodeId> parent_ids;
  std::vector<double> table;

  bool operator==(const Cpt&) const = default;
};

struct ParentLink {
  NodeId parent = 0;
  double p_v = 0.0;
};

Cpt build_cpt_and(NodeId node, std::span<const ParentLink> parents, double p_e);
Cpt build_cpt_or(NodeId node, std::span<const ParentLink> parents, double p_e);

// One CPT per node, in id order. Attacker roots receive the unit prior.
std::vector<Cpt> materialize(const AttackGraph& graph);

// Returns a copy of `graph` with the p_v of edge from->to set to zero.
AttackGraph patch(const AttackGraph& graph, NodeId from, NodeId to);

// Observed node states. At most one observation per node.
class EvidenceSet {
 public:
  EvidenceSet() = default;

  // Throws invalid-evidence when `id` already carries the opposite state.
  void observe(NodeId id, bool state);
  std::optional<bool> state(NodeId id) const;
  bool empty() const noexcept { return observations_.empty(); }
  std::size_t size() const noexcept { return observations_.size(); }
  const std::map<NodeId, bool>& observations() const noexcept { return observations_; }

  EvidenceSet merged(const EvidenceSet& other) const;

  // Throws not-found for ids outside [0, num_nodes).
  void check_against(std::size_t num_nodes) const;

  bool operator==(const EvidenceSet&) const = default;

 private:
  std::map<NodeId, bool> observations_;
};

}  // namespace bagscan
