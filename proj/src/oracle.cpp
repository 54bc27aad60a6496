#include "bagscan/oracle.hpp"

#include <cmath>
#include <string>

#include "bagscan/error.hpp"

namespace bagscan {

namespace {

// Neumaier compensated sum.
struct Accumulator {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

class Enumerator {
 public:
  Enumerator(const AttackGraph& graph, const EvidenceSet& evidence)
      : graph_(graph), evidence_(evidence), cpts_(materialize(graph)), state_(graph.size(), 0),
        totals_(graph.size()) {
    for (NodeId v : graph.topological_order()) {
      if (graph.node(v).attacker_root) {
        state_[v] = 1;
      } else {
        order_.push_back(v);
      }
    }
  }

  OracleResult run() {
    for (NodeId v = 0; v < graph_.size(); ++v) {
      if (graph_.node(v).attacker_root && evidence_.state(v) == false) {
        throw Error(ErrorKind::InconsistentEvidence, "attacker root observed false");
      }
    }
    const double z = visit(0, 1.0);
    if (!(z > 0.0)) throw Error(ErrorKind::InconsistentEvidence, "evidence has zero probability");
    OracleResult result;
    result.evidence_probability = z;
    result.marginals.resize(graph_.size());
    for (NodeId v = 0; v < graph_.size(); ++v) {
      result.marginals[v] = graph_.node(v).attacker_root ? 1.0 : totals_[v].value() / z;
    }
    return result;
  }

 private:
  // Total weight of all completions of the current prefix, scaled by the
  // prefix weight `w`; true-branch contributions are credited to each node.
  double visit(std::size_t depth, double w) {
    if (depth == order_.size()) return w;
    const NodeId v = order_[depth];
    const Cpt& cpt = cpts_[v];
    std::size_t row = 0;
    for (std::size_t k = 0; k < cpt.parent_ids.size(); ++k) {
      row |= static_cast<std::size_t>(state_[cpt.parent_ids[k]]) << k;
    }
    const double p_true = cpt.table[row];
    const auto observed = evidence_.state(v);
    double total = 0.0;
    if (observed != true && p_true < 1.0) {
      state_[v] = 0;
      total += visit(depth + 1, w * (1.0 - p_true));
    }
    if (observed != false && p_true > 0.0) {
      state_[v] = 1;
      const double t = visit(depth + 1, w * p_true);
      totals_[v].add(t);
      total += t;
    }
    state_[v] = 0;
    return total;
  }

  const AttackGraph& graph_;
  const EvidenceSet& evidence_;
  std::vector<Cpt> cpts_;
  std::vector<NodeId> order_;
  std::vector<unsigned char> state_;
  std::vector<Accumulator> totals_;
};

}  // namespace

OracleResult enumerate(const AttackGraph& graph, const EvidenceSet& evidence,
                       std::size_t node_limit) {
  if (graph.size() > node_limit) {
    throw Error(ErrorKind::ResourceLimit, "oracle limited to " + std::to_string(node_limit) +
                                              " nodes, graph has " + std::to_string(graph.size()));
  }
  evidence.check_against(graph.size());
  return Enumerator(graph, evidence).run();
}

}  // namespace bagscan
