#include "bagscan/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "bagscan/error.hpp"

namespace bagscan {

namespace {

constexpr std::size_t kMaxScope = 30;

void check_factor(const Factor& factor, std::size_t num_variables, std::size_t index) {
  const std::string where = "factor " + std::to_string(index);
  if (factor.scope.empty()) throw Error(ErrorKind::InvalidModel, where + " has an empty scope");
  if (factor.scope.size() > kMaxScope) {
    throw Error(ErrorKind::ResourceLimit, where + " scope too large");
  }
  if (factor.table.size() != (std::size_t{1} << factor.scope.size())) {
    throw Error(ErrorKind::InvalidModel, where + " table length does not match scope");
  }
  for (std::size_t k = 0; k < factor.scope.size(); ++k) {
    if (factor.scope[k] >= num_variables) {
      throw Error(ErrorKind::InvalidModel, where + " references an unknown variable");
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (factor.scope[j] == factor.scope[k]) {
        throw Error(ErrorKind::InvalidModel, where + " repeats a variable in its scope");
      }
    }
  }
  for (double value : factor.table) {
    if (!std::isfinite(value) || value < 0.0) {
      throw Error(ErrorKind::InvalidModel, where + " has a negative or non-finite entry");
    }
  }
}

}  // namespace

FactorGraph::FactorGraph(std::size_t num_variables, std::vector<Factor> factors)
    : factors_(std::move(factors)) {
  incident_.assign(num_variables, {});
  offsets_.reserve(factors_.size());
  std::size_t edge = 0;
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    check_factor(factors_[f], num_variables, f);
    offsets_.push_back(edge);
    const auto& scope = factors_[f].scope;
    for (unsigned k = 0; k < scope.size(); ++k, ++edge) {
      edge_variable_.push_back(scope[k]);
      edge_factor_.push_back(f);
      incident_[scope[k]].push_back({f, k, edge});
    }
  }
  for (auto& list : incident_) {
    std::sort(list.begin(), list.end(), [&](const Incidence& a, const Incidence& b) {
      const NodeId oa = factors_[a.factor].owner;
      const NodeId ob = factors_[b.factor].owner;
      return oa != ob ? oa < ob : a.factor < b.factor;
    });
  }
}

FactorGraph from_bag(const AttackGraph& graph) {
  const std::vector<Cpt> cpts = materialize(graph);
  std::vector<Factor> factors;
  std::vector<std::size_t> factor_of(graph.size(), SIZE_MAX);

  for (const Cpt& cpt : cpts) {
    if (cpt.parent_ids.empty()) continue;
    Factor factor;
    factor.owner = cpt.node;
    factor.scope.push_back(cpt.node);
    factor.scope.insert(factor.scope.end(), cpt.parent_ids.begin(), cpt.parent_ids.end());
    factor.table.resize(std::size_t{1} << factor.scope.size());
    for (std::size_t mask = 0; mask < cpt.table.size(); ++mask) {
      factor.table[mask << 1] = 1.0 - cpt.table[mask];
      factor.table[(mask << 1) | 1U] = cpt.table[mask];
    }
    factor_of[cpt.node] = factors.size();
    factors.push_back(std::move(factor));
  }

  for (const BagNode& node : graph.nodes()) {
    if (!node.attacker_root) continue;
    const std::vector<NodeId> kids = graph.children(node.id);
    if (kids.empty()) {
      factors.push_back(Factor{node.id, {node.id}, {0.0, 1.0}});
      continue;
    }
    Factor& host = factors[factor_of[*std::min_element(kids.begin(), kids.end())]];
    const auto pos = static_cast<unsigned>(
        std::find(host.scope.begin(), host.scope.end(), node.id) - host.scope.begin());
    for (std::size_t i = 0; i < host.table.size(); ++i) {
      if (((i >> pos) & 1U) == 0) host.table[i] = 0.0;
    }
  }
  return FactorGraph(graph.size(), std::move(factors));
}

FactorGraph apply_evidence(const FactorGraph& graph, const EvidenceSet& evidence) {
  if (evidence.empty()) return graph;
  evidence.check_against(graph.num_variables());
  std::vector<Factor> factors = graph.factors();
  for (Factor& factor : factors) {
    for (unsigned k = 0; k < factor.scope.size(); ++k) {
      const auto observed = evidence.state(factor.scope[k]);
      if (!observed) continue;
      const std::size_t keep = *observed ? 1U : 0U;
      for (std::size_t i = 0; i < factor.table.size(); ++i) {
        if (((i >> k) & 1U) != keep) factor.table[i] = 0.0;
      }
    }
  }
  return FactorGraph(graph.num_variables(), std::move(factors));
}

nlohmann::json factors_to_json(const FactorGraph& graph) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const Factor& factor = graph.factor(f);
    out.push_back({{"id", f},
                   {"owner", factor.owner},
                   {"scope", factor.scope},
                   {"table", factor.table}});
  }
  return out;
}

}  // namespace bagscan
