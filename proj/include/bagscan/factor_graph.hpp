#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "bagscan/attack_graph.hpp"

namespace bagscan {

// Dense factor over binary variables; table index bit k is the state of
// scope[k].
struct Factor {
  // Node whose conditional distribution the factor carries. Used as the
  // canonical ordering key for a variable's incident factors.
  NodeId owner = 0;
  std::vector<NodeId> scope;
  std::vector<double> table;

  bool operator==(const Factor&) const = default;
};

// Bipartite variable/factor structure. Every (factor, scope position) pair is
// an "edge" with a dense index, which is how messages are addressed.
class FactorGraph {
 public:
  struct Incidence {
    std::size_t factor;
    unsigned position;
    std::size_t edge;
  };

  FactorGraph() = default;
  FactorGraph(std::size_t num_variables, std::vector<Factor> factors);

  std::size_t num_variables() const noexcept { return incident_.size(); }
  std::size_t num_factors() const noexcept { return factors_.size(); }
  std::size_t num_edges() const noexcept { return edge_variable_.size(); }

  const std::vector<Factor>& factors() const noexcept { return factors_; }
  const Factor& factor(std::size_t f) const { return factors_.at(f); }

  std::size_t edge_index(std::size_t factor, unsigned position) const noexcept {
    return offsets_[factor] + position;
  }
  NodeId edge_variable(std::size_t edge) const noexcept { return edge_variable_[edge]; }
  std::size_t edge_factor(std::size_t edge) const noexcept { return edge_factor_[edge]; }

  // Incident factors of `variable`, ordered by (owner, factor index).
  std::span<const Incidence> incident(NodeId variable) const { return incident_.at(variable); }

  bool operator==(const FactorGraph& other) const { return factors_ == other.factors_ &&
                                                            num_variables() == other.num_variables(); }

 private:
  std::vector<Factor> factors_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> edge_variable_;
  std::vector<std::size_t> edge_factor_;
  std::vector<std::vector<Incidence>> incident_;
};

// One factor per non-root node holding its CPT over {node} ∪ parents (node at
// bit 0, parents in CPT order above it). Each attacker root's unit prior is
// folded into the factor of its lowest-id child; a childless root gets a
// unary factor.
FactorGraph from_bag(const AttackGraph& graph);

// Clamps observed variables by zeroing contradicting rows. Scopes are left
// untouched so message addressing does not change.
FactorGraph apply_evidence(const FactorGraph& graph, const EvidenceSet& evidence);

nlohmann::json factors_to_json(const FactorGraph& graph);

// Length-2 messages for both directions of every edge, stored flat so whole
// stores can be compared or blended with the table kernels.
class MessageStore {
 public:
  MessageStore() = default;
  explicit MessageStore(std::size_t num_edges)
      : var_to_factor_(2 * num_edges, 0.5), factor_to_var_(2 * num_edges, 0.5) {}

  std::size_t num_edges() const noexcept { return var_to_factor_.size() / 2; }

  std::span<double, 2> var_to_factor(std::size_t edge) noexcept {
    return std::span<double, 2>(var_to_factor_.data() + 2 * edge, 2);
  }
  std::span<const double, 2> var_to_factor(std::size_t edge) const noexcept {
    return std::span<const double, 2>(var_to_factor_.data() + 2 * edge, 2);
  }
  std::span<double, 2> factor_to_var(std::size_t edge) noexcept {
    return std::span<double, 2>(factor_to_var_.data() + 2 * edge, 2);
  }
  std::span<const double, 2> factor_to_var(std::size_t edge) const noexcept {
    return std::span<const double, 2>(factor_to_var_.data() + 2 * edge, 2);
  }

  std::vector<double>& raw_var_to_factor() noexcept { return var_to_factor_; }
  std::vector<double>& raw_factor_to_var() noexcept { return factor_to_var_; }
  const std::vector<double>& raw_var_to_factor() const noexcept { return var_to_factor_; }
  const std::vector<double>& raw_factor_to_var() const noexcept { return factor_to_var_; }

  bool operator==(const MessageStore&) const = default;

 private:
  std::vector<double> var_to_factor_;
  std::vector<double> factor_to_var_;
};

}  // namespace bagscan
