#include "bagscan/graph_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bagscan/error.hpp"

namespace bagscan {

namespace {

using nlohmann::json;

Gate parse_gate(const std::string& text) {
  if (text == "AND") return Gate::And;
  if (text == "OR") return Gate::Or;
  throw Error(ErrorKind::InvalidModel,
              "unsupported gate '" + text + "' (expected AND or OR)");
}

template <typename T>
T field(const json& object, const char* name) {
  const auto it = object.find(name);
  if (it == object.end()) {
    throw Error(ErrorKind::InvalidModel, std::string("missing field '") + name + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::InvalidModel, std::string("field '") + name + "' has the wrong type");
  }
}

std::string format_probability(double p) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3f", p);
  return buffer;
}

}  // namespace

json graph_to_json(const AttackGraph& graph) {
  json nodes = json::array();
  for (const BagNode& node : graph.nodes()) {
    nodes.push_back({{"id", node.id},
                     {"label", node.label},
                     {"gate", node.gate == Gate::And ? "AND" : "OR"},
                     {"attacker_root", node.attacker_root},
                     {"p_e", node.p_e}});
  }
  json edges = json::array();
  for (const BagEdge& edge : graph.edges()) {
    edges.push_back({{"from", edge.from}, {"to", edge.to}, {"p_v", edge.p_v}});
  }
  json doc = {{"version", kGraphFormatVersion}, {"nodes", nodes}, {"edges", edges}};
  if (!graph.metadata().empty()) doc["metadata"] = graph.metadata();
  return doc;
}

AttackGraph graph_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::InvalidModel, "graph document must be an object");
  const int version = field<int>(doc, "version");
  if (version != kGraphFormatVersion) {
    throw Error(ErrorKind::InvalidModel, "unsupported graph format version " +
                                             std::to_string(version));
  }
  std::vector<BagNode> nodes;
  for (const json& item : field<json>(doc, "nodes")) {
    BagNode node;
    node.id = field<NodeId>(item, "id");
    node.label = item.value("label", std::to_string(node.id));
    node.gate = parse_gate(item.value("gate", std::string("OR")));
    node.attacker_root = item.value("attacker_root", false);
    node.p_e = item.value("p_e", 0.0);
    nodes.push_back(std::move(node));
  }
  std::vector<BagEdge> edges;
  for (const json& item : field<json>(doc, "edges")) {
    edges.push_back({field<NodeId>(item, "from"), field<NodeId>(item, "to"),
                     field<double>(item, "p_v")});
  }
  std::map<std::string, double> metadata;
  if (const auto it = doc.find("metadata"); it != doc.end()) {
    for (const auto& [key, value] : it->items()) {
      if (value.is_number()) metadata[key] = value.get<double>();
    }
  }
  return AttackGraph(std::move(nodes), std::move(edges), std::move(metadata));
}

AttackGraph read_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open graph file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidModel, path.string() + ": " + e.what());
  }
  return graph_from_json(doc);
}

void write_graph_file(const AttackGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << graph_to_json(graph).dump(2) << '\n';
}

std::string graph_to_dot(const AttackGraph& graph, const std::vector<double>* beliefs) {
  std::ostringstream dot;
  dot << "digraph bag {\n  rankdir=TB;\n  node [shape=ellipse];\n";
  for (const BagNode& node : graph.nodes()) {
    std::string label = node.label.empty() ? std::to_string(node.id) : node.label;
    if (beliefs && node.id < beliefs->size()) {
      label += "\\n" + format_probability((*beliefs)[node.id]);
    }
    dot << "  n" << node.id << " [label=\"" << label << "\"";
    if (node.attacker_root) {
      dot << ", shape=box, style=filled, fillcolor=\"#f4cccc\"";
    } else if (node.gate == Gate::And) {
      dot << ", shape=doublecircle";
    }
    dot << "];\n";
  }
  for (const BagEdge& edge : graph.edges()) {
    dot << "  n" << edge.from << " -> n" << edge.to << " [label=\""
        << format_probability(edge.p_v) << "\"";
    if (edge.p_v == 0.0) dot << ", style=dashed, color=gray";
    dot << "];\n";
  }
  dot << "}\n";
  return dot.str();
}

}  // namespace bagscan
