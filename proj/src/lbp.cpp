#include "bagscan/lbp.hpp"

#include <algorithm>
#include <ostream>
#include <thread>

#include "bagscan/error.hpp"
#include "bagscan/kernels.hpp"

namespace bagscan {

namespace {

using Message = std::array<double, 2>;

// Normalizes in place. A vanished message becomes uniform and is reported so
// the caller can flag contradictory evidence.
bool normalize(Message& m) {
  const double total = m[0] + m[1];
  if (total > 0.0) {
    m[0] /= total;
    m[1] /= total;
    return true;
  }
  m = {0.5, 0.5};
  return false;
}

void store(std::span<double, 2> slot, Message fresh, double alpha) {
  if (alpha > 0.0) {
    const Message damped = damp(fresh, std::span<const double, 2>(slot.data(), 2), alpha);
    slot[0] = damped[0];
    slot[1] = damped[1];
  } else {
    slot[0] = fresh[0];
    slot[1] = fresh[1];
  }
}

// Scratch space for factor message computation, one per worker.
struct Workspace {
  std::vector<double> table;
  std::vector<Message> prefix;
};

std::size_t max_table_size(const FactorGraph& graph) {
  std::size_t best = 1;
  for (const Factor& f : graph.factors()) best = std::max(best, f.table.size());
  return best;
}

// Message from factor f to the variable at scope position `target`, using the
// current variable-to-factor messages.
Message factor_message(const FactorGraph& graph, const MessageStore& messages, std::size_t f,
                       unsigned target, Workspace& ws) {
  const Factor& factor = graph.factor(f);
  const std::span<double> work(ws.table.data(), factor.table.size());
  std::copy(factor.table.begin(), factor.table.end(), work.begin());
  for (unsigned k = 0; k < factor.scope.size(); ++k) {
    if (k == target) continue;
    const auto in = messages.var_to_factor(graph.edge_index(f, k));
    kernels::scale_by_bit(work, k, in[0], in[1]);
  }
  const auto [off, on] = kernels::bit_marginal(work, target);
  return {off, on};
}

// Messages from `variable` to each incident factor: product of the other
// incoming factor messages, via prefix/suffix products in incidence order.
template <typename Visit>
void variable_messages(const FactorGraph& graph, const MessageStore& messages, NodeId variable,
                       Workspace& ws, Visit&& visit) {
  const auto incident = graph.incident(variable);
  const std::size_t d = incident.size();
  ws.prefix.resize(d + 1);
  ws.prefix[0] = {1.0, 1.0};
  for (std::size_t i = 0; i < d; ++i) {
    const auto in = messages.factor_to_var(incident[i].edge);
    ws.prefix[i + 1] = {ws.prefix[i][0] * in[0], ws.prefix[i][1] * in[1]};
  }
  Message suffix{1.0, 1.0};
  for (std::size_t i = d; i-- > 0;) {
    visit(incident[i].edge, Message{ws.prefix[i][0] * suffix[0], ws.prefix[i][1] * suffix[1]});
    const auto in = messages.factor_to_var(incident[i].edge);
    suffix = {suffix[0] * in[0], suffix[1] * in[1]};
  }
}

// Belief of one variable; false when the incoming product vanishes.
bool belief_of(const FactorGraph& graph, const MessageStore& messages, NodeId variable,
               double& out) {
  Message product{1.0, 1.0};
  for (const auto& inc : graph.incident(variable)) {
    const auto in = messages.factor_to_var(inc.edge);
    product[0] *= in[0];
    product[1] *= in[1];
  }
  const double total = product[0] + product[1];
  if (!(total > 0.0)) {
    out = 0.5;
    return false;
  }
  out = product[1] / total;
  return true;
}

std::size_t resolve_max_iter(const FactorGraph& graph, const LbpConfig& config) {
  if (config.max_iter > 0) return config.max_iter;
  return std::max<std::size_t>(1, 2 * graph.num_variables());
}

double residual(const LbpConfig& config, const std::vector<double>& now,
                const std::vector<double>& before) {
  return config.metric == ConvergenceMetric::MaxAbsChange
             ? kernels::max_abs_diff(now, before)
             : kernels::sum_abs_diff(now, before);
}

MessageStore starting_messages(const FactorGraph& graph, MessageStore* state) {
  if (state && state->num_edges() == graph.num_edges() && graph.num_edges() > 0) return *state;
  return init_messages(graph);
}

// Splits [0, count) into `workers` contiguous chunks. Each chunk owns its
// workspace; results are independent of the split.
template <typename Body>
std::size_t for_chunks(std::size_t count, unsigned workers, std::vector<Workspace>& spaces,
                       Body&& body) {
  if (workers <= 1 || count < 2 * workers) {
    return body(0, count, spaces[0]);
  }
  std::vector<std::size_t> failures(workers, 0);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = count * w / workers;
      const std::size_t end = count * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] { failures[w] = body(begin, end, spaces[w]); });
    }
  }
  std::size_t total = 0;
  for (std::size_t f : failures) total += f;
  return total;
}

class Runner {
 public:
  Runner(const FactorGraph& graph, const LbpConfig& config, MessageStore* state)
      : graph_(graph), config_(config), state_(state),
        messages_(starting_messages(graph, state)) {
    config_.validate();
    const unsigned workers = config.mode == LbpMode::Parallel ? std::max(1U, config.threads) : 1U;
    spaces_.resize(workers);
    for (auto& ws : spaces_) ws.table.resize(max_table_size(graph));
  }

  LbpResult run() {
    LbpResult result;
    const std::size_t n = graph_.num_variables();
    std::vector<double> before(n), now(n);
    read_beliefs(before);
    const std::size_t max_iter = resolve_max_iter(graph_, config_);
    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
      degenerate_ = config_.mode == LbpMode::Parallel ? parallel_sweep() : sequential_sweep();
      const bool ok = read_beliefs(now);
      const double r = residual(config_, now, before);
      result.iterations = iter;
      result.residual_trace.push_back(r);
      if (config_.snapshots) result.snapshots.push_back(now);
      if (config_.observer) config_.observer(iter, now);
      std::swap(before, now);
      if (ok && r < config_.epsilon) {
        result.converged = true;
        break;
      }
    }
    if (!read_beliefs(before) || degenerate_ > 0) {
      throw Error(ErrorKind::InconsistentEvidence,
                  "message passing produced a zero-probability state");
    }
    result.beliefs = std::move(before);
    if (state_) *state_ = messages_;
    return result;
  }

 private:
  std::size_t variable_phase(std::size_t begin, std::size_t end, Workspace& ws) {
    std::size_t failures = 0;
    for (std::size_t v = begin; v < end; ++v) {
      update_variable(static_cast<NodeId>(v), ws, failures);
    }
    return failures;
  }

  void update_variable(NodeId v, Workspace& ws, std::size_t& failures) {
    variable_messages(graph_, messages_, v, ws, [&](std::size_t edge, Message m) {
      if (!normalize(m)) ++failures;
      store(messages_.var_to_factor(edge), m, config_.alpha);
    });
  }

  void update_factor_edge(std::size_t edge, Workspace& ws, std::size_t& failures) {
    const std::size_t f = graph_.edge_factor(edge);
    const auto position = static_cast<unsigned>(edge - graph_.edge_index(f, 0));
    Message m = factor_message(graph_, messages_, f, position, ws);
    if (!normalize(m)) ++failures;
    store(messages_.factor_to_var(edge), m, config_.alpha);
  }

  std::size_t parallel_sweep() {
    const unsigned workers = static_cast<unsigned>(spaces_.size());
    std::size_t failures = for_chunks(graph_.num_variables(), workers, spaces_,
                                      [&](std::size_t b, std::size_t e, Workspace& ws) {
                                        return variable_phase(b, e, ws);
                                      });
    failures += for_chunks(graph_.num_edges(), workers, spaces_,
                           [&](std::size_t b, std::size_t e, Workspace& ws) {
                             std::size_t local = 0;
                             for (std::size_t edge = b; edge < e; ++edge) {
                               update_factor_edge(edge, ws, local);
                             }
                             return local;
                           });
    return failures;
  }

  // Gauss-Seidel over variables in ascending id: refresh the messages flowing
  // into the variable, then its outgoing messages. Later variables see the
  // updates made earlier in the same sweep.
  std::size_t sequential_sweep() {
    std::size_t failures = 0;
    Workspace& ws = spaces_[0];
    for (NodeId v = 0; v < graph_.num_variables(); ++v) {
      for (const auto& inc : graph_.incident(v)) update_factor_edge(inc.edge, ws, failures);
      update_variable(v, ws, failures);
    }
    return failures;
  }

  bool read_beliefs(std::vector<double>& out) const {
    bool ok = true;
    for (NodeId v = 0; v < graph_.num_variables(); ++v) {
      ok = belief_of(graph_, messages_, v, out[v]) && ok;
    }
    return ok;
  }

  const FactorGraph& graph_;
  LbpConfig config_;
  MessageStore* state_;
  MessageStore messages_;
  std::vector<Workspace> spaces_;
  std::size_t degenerate_ = 0;
};

}  // namespace

void LbpConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "damping alpha must lie in [0,1)");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
}

LbpConfig lbp_config_from_json(const nlohmann::json& doc) {
  LbpConfig config;
  try {
    const std::string mode = doc.value("mode", std::string("parallel"));
    if (mode == "parallel" || mode == "plbp") {
      config.mode = LbpMode::Parallel;
    } else if (mode == "sequential" || mode == "slbp") {
      config.mode = LbpMode::Sequential;
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown LBP mode '" + mode + "'");
    }
    config.alpha = doc.value("alpha", config.alpha);
    config.epsilon = doc.value("epsilon", config.epsilon);
    config.max_iter = doc.value("max_iter", config.max_iter);
    const std::string metric = doc.value("metric", std::string("max_abs_change"));
    if (metric == "max_abs_change") {
      config.metric = ConvergenceMetric::MaxAbsChange;
    } else if (metric == "sum_abs_change") {
      config.metric = ConvergenceMetric::SumAbsChange;
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown convergence metric '" + metric + "'");
    }
    config.snapshots = doc.value("snapshots", config.snapshots);
    config.threads = doc.value("threads", config.threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad LBP config: ") + e.what());
  }
  config.validate();
  return config;
}

nlohmann::json to_json(const LbpConfig& config) {
  return {{"mode", config.mode == LbpMode::Parallel ? "parallel" : "sequential"},
          {"alpha", config.alpha},
          {"epsilon", config.epsilon},
          {"max_iter", config.max_iter},
          {"metric", config.metric == ConvergenceMetric::MaxAbsChange ? "max_abs_change"
                                                                       : "sum_abs_change"},
          {"snapshots", config.snapshots},
          {"threads", config.threads}};
}

std::array<double, 2> damp(std::span<const double, 2> fresh, std::span<const double, 2> old,
                           double alpha) {
  Message out{(1.0 - alpha) * fresh[0] + alpha * old[0], (1.0 - alpha) * fresh[1] + alpha * old[1]};
  normalize(out);
  return out;
}

MessageStore init_messages(const FactorGraph& graph) {
  MessageStore store(graph.num_edges());
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const Factor& factor = graph.factor(f);
    for (unsigned k = 0; k < factor.scope.size(); ++k) {
      const auto [off, on] = kernels::bit_marginal(factor.table, k);
      Message m{off, on};
      normalize(m);
      auto slot = store.factor_to_var(graph.edge_index(f, k));
      slot[0] = m[0];
      slot[1] = m[1];
    }
  }
  return store;
}

std::vector<double> beliefs_from_messages(const FactorGraph& graph, const MessageStore& store) {
  std::vector<double> beliefs(graph.num_variables());
  for (NodeId v = 0; v < graph.num_variables(); ++v) {
    if (!belief_of(graph, store, v, beliefs[v])) {
      throw Error(ErrorKind::InconsistentEvidence,
                  "variable " + std::to_string(v) + " has an all-zero belief");
    }
  }
  return beliefs;
}

LbpResult run_sequential(const FactorGraph& graph, const LbpConfig& config, MessageStore* state) {
  LbpConfig c = config;
  c.mode = LbpMode::Sequential;
  return Runner(graph, c, state).run();
}

LbpResult run_parallel(const FactorGraph& graph, const LbpConfig& config, MessageStore* state) {
  LbpConfig c = config;
  c.mode = LbpMode::Parallel;
  return Runner(graph, c, state).run();
}

LbpResult run_lbp(const FactorGraph& graph, const LbpConfig& config, MessageStore* state) {
  return Runner(graph, config, state).run();
}

LbpResult run_sequential(const FactorGraph& graph, const EvidenceSet& evidence,
                         const LbpConfig& config) {
  return run_sequential(apply_evidence(graph, evidence), config);
}

LbpResult run_parallel(const FactorGraph& graph, const EvidenceSet& evidence,
                       const LbpConfig& config) {
  return run_parallel(apply_evidence(graph, evidence), config);
}

void write_snapshots_csv(std::ostream& out, const LbpResult& result) {
  out << "iteration,node,belief\n";
  for (std::size_t it = 0; it < result.snapshots.size(); ++it) {
    for (std::size_t v = 0; v < result.snapshots[it].size(); ++v) {
      out << (it + 1) << ',' << v << ',' << result.snapshots[it][v] << '\n';
    }
  }
}

}  // namespace bagscan
