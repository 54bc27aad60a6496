#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "bagscan/factor_graph.hpp"

namespace bagscan {

enum class LbpMode { Sequential, Parallel };
enum class ConvergenceMetric { MaxAbsChange, SumAbsChange };

struct LbpConfig {
  LbpMode mode = LbpMode::Parallel;
  // Weight on the previous message; 0 disables damping.
  double alpha = 0.0;
  double epsilon = 1e-3;
  // 0 selects twice the number of variables.
  std::size_t max_iter = 0;
  ConvergenceMetric metric = ConvergenceMetric::MaxAbsChange;
  bool snapshots = false;
  // Called with the beliefs after every iteration (used for streaming).
  std::function<void(std::size_t iteration, std::span<const double> beliefs)> observer;
  // Worker count for the two phases of a parallel iteration.
  unsigned threads = 1;

  // Throws invalid-argument when alpha is outside [0,1) or epsilon <= 0.
  void validate() const;
};

LbpConfig lbp_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const LbpConfig& config);

struct LbpResult {
  // p(X_i = T) per variable.
  std::vector<double> beliefs;
  bool converged = false;
  std::size_t iterations = 0;
  // One belief vector per iteration when snapshots are enabled.
  std::vector<std::vector<double>> snapshots;
  std::vector<double> residual_trace;
};

// Variable-to-factor messages uniform; factor-to-variable messages are the
// normalized marginals of each factor onto the receiving variable.
MessageStore init_messages(const FactorGraph& graph);

// (1 - alpha) * fresh + alpha * old, renormalized.
std::array<double, 2> damp(std::span<const double, 2> fresh, std::span<const double, 2> old,
                           double alpha);

// Normalized product of each variable's incoming factor messages, true-state
// component. Throws inconsistent-evidence when a product vanishes.
std::vector<double> beliefs_from_messages(const FactorGraph& graph, const MessageStore& store);

// Sequential (in-place) and parallel (synchronous two-phase) loopy belief
// propagation. `state`, when non-null and shaped for `graph`, provides the
// starting messages and receives the final ones; otherwise messages start
// from init_messages.
LbpResult run_sequential(const FactorGraph& graph, const LbpConfig& config,
                         MessageStore* state = nullptr);
LbpResult run_parallel(const FactorGraph& graph, const LbpConfig& config,
                       MessageStore* state = nullptr);
LbpResult run_lbp(const FactorGraph& graph, const LbpConfig& config,
                  MessageStore* state = nullptr);

// Evidence-taking forms: clamp, then run.
LbpResult run_sequential(const FactorGraph& graph, const EvidenceSet& evidence,
                         const LbpConfig& config);
LbpResult run_parallel(const FactorGraph& graph, const EvidenceSet& evidence,
                       const LbpConfig& config);

// "iteration,node,belief" rows, iterations counted from 1.
void write_snapshots_csv(std::ostream& out, const LbpResult& result);

}  // namespace bagscan
