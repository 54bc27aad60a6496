#pragma once

#include <cstddef>
#include <vector>

#include "bagscan/attack_graph.hpp"

namespace bagscan {

struct OracleResult {
  // p(X_i = T | evidence) per node.
  std::vector<double> marginals;
  double evidence_probability = 1.0;
};

inline constexpr std::size_t kOracleNodeLimit = 25;

// Brute-force enumeration of the joint. Attacker roots are fixed to T; every
// other node is branched on in topological order, pruning zero-weight
// prefixes. Throws resource-limit above `node_limit` nodes and
// inconsistent-evidence when the evidence has probability zero.
OracleResult enumerate(const AttackGraph& graph, const EvidenceSet& evidence = {},
                       std::size_t node_limit = kOracleNodeLimit);

}  // namespace bagscan
