#include "mlrisk/graph_io.hpp"

#include <set>

#include "json_util.hpp"
#include "mlrisk/datalog.hpp"

namespace mlrisk {

using detail::json;

std::string graph_to_json(const AttackGraph& graph) {
  json nodes = json::array();
  for (const auto& n : graph.nodes()) {
    json j = {{"id", n.id}, {"kind", std::string(to_string(n.kind))}, {"label", n.label}};
    if (n.fact) j["fact"] = n.fact->to_string();
    if (n.kind == NodeKind::And) j["rule_id"] = n.rule_id;
    nodes.push_back(std::move(j));
  }
  json edges = json::array();
  for (const auto& e : graph.edges()) edges.push_back({{"src", e.src}, {"dst", e.dst}});
  return json{{"schema_version", detail::kSchemaVersion}, {"nodes", nodes}, {"edges", edges},
              {"goals", graph.goals()}}
      .dump(2);
}

AttackGraph graph_from_json(std::string_view text) {
  const std::string what = "attack graph";
  json doc = detail::parse_json(text, what);
  detail::check_schema(doc, what);
  std::vector<GraphNode> nodes;
  std::set<std::string> ids;
  const json node_list = detail::field<json>(doc, "nodes", what);
  for (const auto& j : node_list) {
    GraphNode n;
    n.id = detail::field<std::string>(j, "id", what);
    n.kind = node_kind_from_string(detail::field<std::string>(j, "kind", what));
    n.label = j.value("label", "");
    if (j.contains("fact")) n.fact = datalog::parse_atom(j["fact"].get<std::string>());
    if (n.kind != NodeKind::And && !n.fact)
      throw ValidationError(what + ": fact node '" + n.id + "' has no fact");
    n.rule_id = j.value("rule_id", "");
    if (!ids.insert(n.id).second) throw ValidationError(what + ": duplicate node id '" + n.id + "'");
    nodes.push_back(std::move(n));
  }
  std::vector<GraphEdge> edges;
  const json edge_list = detail::field<json>(doc, "edges", what);
  for (const auto& j : edge_list) {
    GraphEdge e{detail::field<std::string>(j, "src", what), detail::field<std::string>(j, "dst", what)};
    if (!ids.contains(e.src) || !ids.contains(e.dst))
      throw ValidationError(what + ": edge " + e.src + " -> " + e.dst + " names an unknown node");
    edges.push_back(std::move(e));
  }
  auto goals = doc.value("goals", std::vector<std::string>{});
  for (const auto& g : goals)
    if (!ids.contains(g)) throw ValidationError(what + ": goal '" + g + "' is not a node");
  return AttackGraph(std::move(nodes), std::move(edges), std::move(goals));
}

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string graph_to_dot(const AttackGraph& graph) {
  std::set<std::string> goals(graph.goals().begin(), graph.goals().end());
  std::string out = "digraph attack_graph {\n  rankdir=BT;\n";
  for (const auto& n : graph.nodes()) {
    const char* shape = n.kind == NodeKind::And ? "ellipse" : n.kind == NodeKind::Or ? "diamond" : "box";
    out += "  \"" + n.id + "\" [shape=" + shape + ", label=\"" + dot_escape(n.label) + "\"";
    if (goals.contains(n.id)) out += ", style=bold";
    out += "];\n";
  }
  for (const auto& e : graph.edges()) out += "  \"" + e.src + "\" -> \"" + e.dst + "\";\n";
  out += "}\n";
  return out;
}

}  // namespace mlrisk
