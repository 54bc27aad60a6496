#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bagscan/attack_graph.hpp"
#include "bagscan/bench.hpp"
#include "bagscan/error.hpp"
#include "bagscan/junction_tree.hpp"
#include "bagscan/lbp.hpp"

namespace bagscan {

struct ServiceConfig {
  std::size_t jt_budget = std::size_t{1} << 28;
  LbpConfig lbp;
};

struct QueryOptions {
  // Unset: junction tree when it fits the budget, parallel LBP otherwise.
  std::optional<Method> method;
  // Start LBP from freshly initialized messages instead of the last fixed point.
  bool cold = false;
};

// One loaded graph with its evidence, applied patches and inference caches.
// Every public member locks the session, so mutations are serialized.
// Mutations are transactional: if the recomputation fails, nothing changes.
class Session {
 public:
  Session(std::string id, AttackGraph graph, ServiceConfig config);

  const std::string& id() const noexcept { return id_; }

  nlohmann::json beliefs(const QueryOptions& options);
  // Full replacement; keys are node labels (or numeric ids), values booleans.
  nlohmann::json set_evidence(const nlohmann::json& body, const QueryOptions& options);
  // Body {"from": node, "to": node}.
  nlohmann::json add_patch(const nlohmann::json& body, const QueryOptions& options);
  nlohmann::json clear_patches(const QueryOptions& options);
  nlohmann::json graph_json();
  nlohmann::json feasibility();

  // Runs LBP on the current state and calls `emit` with one JSON object per
  // iteration; returning false from `emit` cancels the run. Returns the
  // final beliefs object, or null when cancelled.
  nlohmann::json stream_iterations(Method method, bool cold,
                                   const std::function<bool(const nlohmann::json&)>& emit);

  AttackGraph current_graph();
  EvidenceSet evidence();

 private:
  struct Outcome {
    Method method = Method::PLbp;
    std::vector<double> beliefs;
    std::optional<LbpResult> lbp;
    std::optional<JunctionTree> jt;
    std::optional<MessageStore> messages;
  };

  Method resolve(const QueryOptions& options, const AttackGraph& graph);
  Outcome compute(const QueryOptions& options, const AttackGraph& graph, const EvidenceSet& ev,
                  bool graph_changed);
  void commit(Outcome& outcome);
  nlohmann::json render(const Outcome& outcome) const;
  NodeId resolve_node(const nlohmann::json& key) const;

  std::mutex mu_;
  std::string id_;
  ServiceConfig config_;
  AttackGraph original_;
  AttackGraph current_;
  EvidenceSet evidence_;
  std::vector<std::pair<NodeId, NodeId>> patches_;
  std::optional<JunctionTree> jt_;
  std::optional<JunctionTree> jt_original_;
  std::optional<Feasibility> feasibility_;
  std::map<LbpMode, MessageStore> warm_;
  std::optional<LbpResult> last_lbp_;
};

class SessionManager {
 public:
  explicit SessionManager(ServiceConfig config = {}) : config_(std::move(config)) {}

  std::shared_ptr<Session> create(AttackGraph graph);
  // Throws not-found.
  std::shared_ptr<Session> find(const std::string& id) const;
  std::size_t size() const;
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  ServiceConfig config_;
  mutable std::mutex mu_;
  std::size_t next_ = 1;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// HTTP status used for each error kind.
int http_status(ErrorKind kind) noexcept;

// HTTP/JSON front end over a SessionManager.
class HttpService {
 public:
  explicit HttpService(ServiceConfig config = {});
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks until stop() is called from elsewhere.
  bool run(const std::string& host, int port);
  void stop();

  SessionManager& sessions() noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bagscan
