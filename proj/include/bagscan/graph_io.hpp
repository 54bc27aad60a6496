#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "bagscan/attack_graph.hpp"

namespace bagscan {

inline constexpr int kGraphFormatVersion = 1;

// Versioned graph document:
//   { "version": 1,
//     "nodes": [{"id", "label", "gate", "attacker_root", "p_e"}],
//     "edges": [{"from", "to", "p_v"}],
//     "metadata": {...} }            (optional)
nlohmann::json graph_to_json(const AttackGraph& graph);
AttackGraph graph_from_json(const nlohmann::json& doc);

AttackGraph read_graph_file(const std::filesystem::path& path);
void write_graph_file(const AttackGraph& graph, const std::filesystem::path& path);

// Graphviz rendering. Patched edges are dashed; optional beliefs annotate nodes.
std::string graph_to_dot(const AttackGraph& graph, const std::vector<double>* beliefs = nullptr);

}  // namespace bagscan
