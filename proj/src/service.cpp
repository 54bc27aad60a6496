#include "bagscan/service.hpp"

#include <algorithm>
#include <string>

#include "bagscan/error.hpp"
#include "bagscan/factor_graph.hpp"
#include "bagscan/graph_io.hpp"
#include "bagscan/oracle.hpp"

namespace bagscan {

namespace {

struct Cancelled {};

bool is_lbp(Method m) { return m == Method::PLbp || m == Method::SLbp; }

LbpMode mode_of(Method m) { return m == Method::SLbp ? LbpMode::Sequential : LbpMode::Parallel; }

}  // namespace

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::InconsistentEvidence: return 409;
    case ErrorKind::InvalidModel:
    case ErrorKind::InvalidEvidence:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidArgument: return 422;
    case ErrorKind::ResourceLimit: return 507;
    case ErrorKind::Internal: return 500;
  }
  return 500;
}

Session::Session(std::string id, AttackGraph graph, ServiceConfig config)
    : id_(std::move(id)), config_(std::move(config)), original_(graph), current_(std::move(graph)) {
  config_.lbp.validate();
}

NodeId Session::resolve_node(const nlohmann::json& key) const {
  if (key.is_number_unsigned()) {
    const auto id = key.get<std::uint64_t>();
    if (id >= current_.size()) throw Error(ErrorKind::NotFound, "no node " + std::to_string(id));
    return static_cast<NodeId>(id);
  }
  if (!key.is_string()) throw Error(ErrorKind::InvalidArgument, "node reference must be a label or id");
  const std::string text = key.get<std::string>();
  if (const auto found = current_.find_label(text)) return *found;
  if (!text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const auto id = std::stoull(text);
    if (id < current_.size()) return static_cast<NodeId>(id);
  }
  throw Error(ErrorKind::NotFound, "no node '" + text + "'");
}

Method Session::resolve(const QueryOptions& options, const AttackGraph& graph) {
  if (options.method) return *options.method;
  // Patches only zero probabilities and leave the structure alone, so one
  // prediction serves the whole session.
  if (!feasibility_) feasibility_ = predict_feasibility(graph, config_.jt_budget);
  return feasibility_->fits ? Method::Jt : Method::PLbp;
}

Session::Outcome Session::compute(const QueryOptions& options, const AttackGraph& graph,
                                  const EvidenceSet& ev, bool graph_changed) {
  Outcome out;
  out.method = resolve(options, graph);
  switch (out.method) {
    case Method::Jt: {
      if (!graph_changed && jt_) {
        out.beliefs = jt_->marginals(ev);
      } else {
        out.jt = JunctionTree::build(graph, JtOptions{config_.jt_budget});
        out.beliefs = out.jt->marginals(ev);
      }
      break;
    }
    case Method::Oracle:
      out.beliefs = enumerate(graph, ev).marginals;
      break;
    case Method::SLbp:
    case Method::PLbp: {
      const FactorGraph fg = apply_evidence(from_bag(graph), ev);
      LbpConfig config = config_.lbp;
      config.mode = mode_of(out.method);
      const auto warm = warm_.find(config.mode);
      MessageStore messages = (!options.cold && warm != warm_.end() &&
                               warm->second.num_edges() == fg.num_edges())
                                  ? warm->second
                                  : init_messages(fg);
      out.lbp = run_lbp(fg, config, &messages);
      out.beliefs = out.lbp->beliefs;
      out.messages = std::move(messages);
      break;
    }
  }
  return out;
}

void Session::commit(Outcome& outcome) {
  if (outcome.jt) jt_ = std::move(outcome.jt);
  if (outcome.messages) warm_[mode_of(outcome.method)] = std::move(*outcome.messages);
  if (outcome.lbp) last_lbp_ = outcome.lbp;
}

nlohmann::json Session::render(const Outcome& outcome) const {
  nlohmann::json by_label = nlohmann::json::object();
  nlohmann::json nodes = nlohmann::json::array();
  for (const BagNode& node : current_.nodes()) {
    by_label[node.label] = outcome.beliefs[node.id];
    nodes.push_back({{"id", node.id}, {"label", node.label}, {"belief", outcome.beliefs[node.id]}});
  }
  nlohmann::json ev = nlohmann::json::object();
  for (const auto& [id, state] : evidence_.observations()) ev[current_.node(id).label] = state;
  nlohmann::json patches = nlohmann::json::array();
  for (const auto& [from, to] : patches_) {
    patches.push_back({{"from", current_.node(from).label}, {"to", current_.node(to).label}});
  }
  nlohmann::json doc = {{"session", id_},     {"method", to_string(outcome.method)},
                        {"beliefs", by_label}, {"nodes", nodes},
                        {"evidence", ev},      {"patches", patches}};
  if (outcome.lbp) {
    doc["converged"] = outcome.lbp->converged;
    doc["iterations"] = outcome.lbp->iterations;
  } else {
    doc["converged"] = true;
  }
  return doc;
}

nlohmann::json Session::beliefs(const QueryOptions& options) {
  std::lock_guard lock(mu_);
  Outcome out = compute(options, current_, evidence_, false);
  commit(out);
  return render(out);
}

nlohmann::json Session::set_evidence(const nlohmann::json& body, const QueryOptions& options) {
  std::lock_guard lock(mu_);
  if (!body.is_object()) throw Error(ErrorKind::InvalidArgument, "evidence must be a JSON object");
  EvidenceSet next;
  for (const auto& [key, value] : body.items()) {
    if (!value.is_boolean()) throw Error(ErrorKind::InvalidArgument, "evidence values must be booleans");
    next.observe(resolve_node(nlohmann::json(key)), value.get<bool>());
  }
  Outcome out = compute(options, current_, next, false);
  evidence_ = std::move(next);
  commit(out);
  return render(out);
}

nlohmann::json Session::add_patch(const nlohmann::json& body, const QueryOptions& options) {
  std::lock_guard lock(mu_);
  if (!body.is_object() || !body.contains("from") || !body.contains("to")) {
    throw Error(ErrorKind::InvalidArgument, "patch body needs 'from' and 'to'");
  }
  const NodeId from = resolve_node(body.at("from"));
  const NodeId to = resolve_node(body.at("to"));
  AttackGraph next = patch(current_, from, to);
  Outcome out = compute(options, next, evidence_, true);
  current_ = std::move(next);
  if (std::find(patches_.begin(), patches_.end(), std::pair{from, to}) == patches_.end()) {
    patches_.emplace_back(from, to);
  }
  if (!jt_original_ && jt_ && patches_.size() == 1) jt_original_ = std::move(jt_);
  jt_.reset();
  commit(out);
  return render(out);
}

nlohmann::json Session::clear_patches(const QueryOptions& options) {
  std::lock_guard lock(mu_);
  if (patches_.empty()) {
    Outcome out = compute(options, current_, evidence_, false);
    commit(out);
    return render(out);
  }
  std::optional<JunctionTree> saved = std::move(jt_);
  jt_ = jt_original_;
  Outcome out;
  try {
    out = compute(options, original_, evidence_, !jt_.has_value());
  } catch (...) {
    jt_ = std::move(saved);
    throw;
  }
  current_ = original_;
  patches_.clear();
  commit(out);
  return render(out);
}

nlohmann::json Session::graph_json() {
  std::lock_guard lock(mu_);
  nlohmann::json doc = graph_to_json(current_);
  nlohmann::json patched = nlohmann::json::array();
  for (const auto& [from, to] : patches_) patched.push_back({{"from", from}, {"to", to}});
  doc["patched"] = patched;
  doc["session"] = id_;
  return doc;
}

nlohmann::json Session::feasibility() {
  std::lock_guard lock(mu_);
  if (!feasibility_) feasibility_ = predict_feasibility(current_, config_.jt_budget);
  return {{"predicted_entries", feasibility_->predicted_entries},
          {"budget", feasibility_->budget},
          {"fits", feasibility_->fits},
          {"induced_width", feasibility_->induced_width},
          {"clusters", feasibility_->num_clusters},
          {"default_method", to_string(feasibility_->fits ? Method::Jt : Method::PLbp)}};
}

nlohmann::json Session::stream_iterations(Method method, bool cold,
                                          const std::function<bool(const nlohmann::json&)>& emit) {
  if (!is_lbp(method)) throw Error(ErrorKind::InvalidArgument, "iteration streams need an LBP method");
  std::lock_guard lock(mu_);
  const FactorGraph fg = apply_evidence(from_bag(current_), evidence_);
  LbpConfig config = config_.lbp;
  config.mode = mode_of(method);
  config.observer = [&](std::size_t iteration, std::span<const double> beliefs) {
    nlohmann::json by_label = nlohmann::json::object();
    for (const BagNode& node : current_.nodes()) by_label[node.label] = beliefs[node.id];
    if (!emit({{"iteration", iteration}, {"beliefs", by_label}})) throw Cancelled{};
  };
  const auto warm = warm_.find(config.mode);
  MessageStore messages =
      (!cold && warm != warm_.end() && warm->second.num_edges() == fg.num_edges()) ? warm->second
                                                                                   : init_messages(fg);
  Outcome out;
  out.method = method;
  try {
    out.lbp = run_lbp(fg, config, &messages);
  } catch (const Cancelled&) {
    return nullptr;
  }
  out.beliefs = out.lbp->beliefs;
  out.messages = std::move(messages);
  commit(out);
  return render(out);
}

AttackGraph Session::current_graph() {
  std::lock_guard lock(mu_);
  return current_;
}

EvidenceSet Session::evidence() {
  std::lock_guard lock(mu_);
  return evidence_;
}

std::shared_ptr<Session> SessionManager::create(AttackGraph graph) {
  std::lock_guard lock(mu_);
  const std::string id = "s" + std::to_string(next_++);
  auto session = std::make_shared<Session>(id, std::move(graph), config_);
  sessions_.emplace(id, session);
  return session;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::NotFound, "no session '" + id + "'");
  return it->second;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace bagscan
