#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bagscan/attack_graph.hpp"
#include "bagscan/factor_graph.hpp"
#include "bagscan/kernels.hpp"

namespace bagscan {

// Simple undirected graph with bitset rows; adequate for a few thousand nodes.
class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  explicit UndirectedGraph(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_; }
  void add_edge(NodeId a, NodeId b);
  bool has_edge(NodeId a, NodeId b) const;
  std::vector<NodeId> neighbors(NodeId v) const;
  std::size_t degree(NodeId v) const;

  bool operator==(const UndirectedGraph&) const = default;

 private:
  friend class Eliminator;
  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::size_t edges_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Skeleton of the DAG plus edges between co-parents.
UndirectedGraph moralize(const AttackGraph& graph);

enum class EliminationHeuristic { MinWeight };

struct EliminationOrder {
  std::vector<NodeId> order;
  EliminationHeuristic heuristic = EliminationHeuristic::MinWeight;
  // Largest elimination clique minus one.
  std::size_t induced_width = 0;
};

struct Triangulation {
  EliminationOrder order;
  UndirectedGraph chordal;
  std::vector<std::pair<NodeId, NodeId>> fill_edges;
  // cliques[k]: the eliminated variable at step k plus its remaining
  // neighbours, sorted ascending.
  std::vector<std::vector<NodeId>> elimination_cliques;
};

// Greedy elimination. Each step removes the variable whose closed
// neighbourhood has the smallest joint domain size (all variables binary, so
// this is the smallest current degree); ties go to the lowest id.
Triangulation eliminate(const UndirectedGraph& moral,
                        EliminationHeuristic heuristic = EliminationHeuristic::MinWeight);

// Maximal cliques of the triangulated graph in elimination order.
std::vector<std::vector<NodeId>> maximal_cliques(const Triangulation& triangulation);

struct JtOptions {
  // Upper bound on the total number of cluster-table entries.
  std::size_t entry_budget = std::size_t{1} << 28;
};

// Saturating sum of 2^|C| over the maximal cliques.
std::size_t predicted_table_entries(const std::vector<std::vector<NodeId>>& cliques);

struct Feasibility {
  std::size_t predicted_entries = 0;
  std::size_t induced_width = 0;
  std::size_t num_clusters = 0;
  std::size_t budget = 0;
  bool fits = false;
};

Feasibility predict_feasibility(const AttackGraph& graph, std::size_t budget);

struct SepsetEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<NodeId> sepset;
};

struct CliqueTreeStats {
  std::size_t num_factors = 0;
  // Largest cluster scope.
  std::size_t max_scope = 0;
  unsigned domain_size = 2;
  std::size_t table_entries = 0;
};

// Tree of maximal cliques with factor potentials. Immutable once built;
// any number of propagate() calls may share it.
class CliqueTree {
 public:
  struct Link {
    std::size_t neighbor;
    std::size_t edge;
  };

  const std::vector<std::vector<NodeId>>& clusters() const noexcept { return clusters_; }
  const std::vector<SepsetEdge>& edges() const noexcept { return edges_; }
  // factor_assignment()[f] is the cluster holding factor f.
  const std::vector<std::size_t>& factor_assignment() const noexcept { return assignment_; }
  const CliqueTreeStats& stats() const noexcept { return stats_; }
  std::span<const Link> links(std::size_t cluster) const { return links_.at(cluster); }
  std::span<const double> potential(std::size_t cluster) const { return potentials_.at(cluster); }
  std::size_t num_variables() const noexcept { return home_.size(); }
  // Smallest cluster containing the variable (lowest id on ties).
  std::size_t home_cluster(NodeId variable) const;
  // Bit position of `variable` inside `cluster`, or -1.
  int position(std::size_t cluster, NodeId variable) const;

 private:
  friend CliqueTree build_clique_tree(const Triangulation&, const FactorGraph&, const JtOptions&);
  friend class Propagator;

  std::vector<std::vector<NodeId>> clusters_;
  std::vector<SepsetEdge> edges_;
  std::vector<std::size_t> assignment_;
  CliqueTreeStats stats_;
  std::vector<std::vector<Link>> links_;
  std::vector<std::vector<double>> potentials_;
  // projection_[2e + d]: cluster index -> sepset index for the message sent
  // along edge e (d = 0: a->b, d = 1: b->a). Built on the sender's scope.
  std::vector<kernels::IndexProjection> projection_;
  std::vector<std::vector<unsigned>> summed_bits_;
  std::vector<std::size_t> home_;
};

// Assembles the clique tree as a maximum-weight spanning tree over sepset
// cardinality (disconnected parts joined by empty sepsets), assigns each
// factor to the lowest-id cluster covering its scope, and multiplies
// potentials. Throws resource-limit when the cluster tables would exceed the
// budget.
CliqueTree build_clique_tree(const Triangulation& triangulation, const FactorGraph& factors,
                             const JtOptions& options = {});

// Calibrated Shenoy-Shafer messages for one evidence set. messages[2e + d]
// follows the CliqueTree projection convention.
struct Calibration {
  EvidenceSet evidence;
  std::vector<std::vector<double>> messages;
};

Calibration propagate(const CliqueTree& tree, const EvidenceSet& evidence);

// Normalized joint over a cluster's variables given the calibration.
std::vector<double> cluster_belief(const CliqueTree& tree, const Calibration& calibration,
                                   std::size_t cluster);

// p(X = T | evidence) read from the variable's home cluster.
double marginal(const CliqueTree& tree, const Calibration& calibration, NodeId variable);
double marginal_in_cluster(const CliqueTree& tree, const Calibration& calibration,
                           NodeId variable, std::size_t cluster);
std::vector<double> marginals(const CliqueTree& tree, const Calibration& calibration);

// Build-once, query-many wrapper used by the CLI, service and benchmarks.
class JunctionTree {
 public:
  static JunctionTree build(const AttackGraph& graph, const JtOptions& options = {});

  std::vector<double> marginals(const EvidenceSet& evidence = {}) const;
  const CliqueTree& tree() const noexcept { return tree_; }
  const Triangulation& triangulation() const noexcept { return triangulation_; }
  const FactorGraph& factor_graph() const noexcept { return factors_; }
  nlohmann::json diagnostics() const;

 private:
  FactorGraph factors_;
  Triangulation triangulation_;
  CliqueTree tree_;
  std::size_t budget_ = 0;
};

}  // namespace bagscan
