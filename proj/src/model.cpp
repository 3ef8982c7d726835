#include "mlrisk/model.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>

#include "mlrisk/error.hpp"

namespace mlrisk {

std::string SourcePos::to_string() const {
  std::string where = file.empty() ? "<input>" : file;
  return where + ":" + std::to_string(line) + ":" + std::to_string(column);
}

bool Atom::is_ground() const {
  return std::none_of(args.begin(), args.end(),
                      [](const Term& t) { return t.is_variable(); });
}

std::string Atom::to_string() const {
  std::string out = predicate;
  if (args.empty()) return out;
  out += '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i > 0) out += ',';
    out += args[i].text;
  }
  out += ')';
  return out;
}

std::string Rule::technique() const {
  auto it = annotations.find("technique");
  return it == annotations.end() ? std::string{} : it->second;
}

std::string Rule::to_string() const {
  std::string out = head.to_string();
  if (body.empty()) return out + ".";
  out += " :-\n";
  for (std::size_t i = 0; i < body.size(); ++i) {
    out += "    " + body[i].to_string();
    out += (i + 1 == body.size()) ? ".\n" : ",\n";
  }
  return out;
}

std::string content_id(std::string_view content) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : content) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::And: return "AND";
    case NodeKind::Or: return "OR";
    case NodeKind::Leaf: return "LEAF";
  }
  return "LEAF";
}

NodeKind node_kind_from_string(std::string_view text) {
  if (text == "AND") return NodeKind::And;
  if (text == "OR") return NodeKind::Or;
  if (text == "LEAF") return NodeKind::Leaf;
  throw ValidationError("unknown node kind '" + std::string(text) + "'");
}

AttackGraph::AttackGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges,
                         std::vector<std::string> goals)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), goals_(std::move(goals)) {
  std::sort(nodes_.begin(), nodes_.end(),
            [](const GraphNode& a, const GraphNode& b) { return a.id < b.id; });
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  std::sort(goals_.begin(), goals_.end());
  goals_.erase(std::unique(goals_.begin(), goals_.end()), goals_.end());

  index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].id, i);
  in_.assign(nodes_.size(), {});
  out_.assign(nodes_.size(), {});
  for (const auto& e : edges_) {
    auto s = index_.find(e.src);
    auto d = index_.find(e.dst);
    if (s == index_.end() || d == index_.end()) continue;
    out_[s->second].push_back(d->second);
    in_[d->second].push_back(s->second);
  }
}

std::optional<std::size_t> AttackGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const GraphNode* AttackGraph::find(std::string_view id) const {
  auto idx = index_of(id);
  return idx ? &nodes_[*idx] : nullptr;
}

std::size_t AttackGraph::count(NodeKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      nodes_.begin(), nodes_.end(), [kind](const GraphNode& n) { return n.kind == kind; }));
}

std::vector<GraphViolation> edge_partition_check(const AttackGraph& graph) {
  std::vector<GraphViolation> out;
  const auto& nodes = graph.nodes();

  for (const auto& e : graph.edges()) {
    const GraphNode* src = graph.find(e.src);
    const GraphNode* dst = graph.find(e.dst);
    if (src == nullptr || dst == nullptr) {
      out.push_back({e.src, e.dst, "edge references an unknown node"});
      continue;
    }
    bool fact_to_rule = src->kind != NodeKind::And && dst->kind == NodeKind::And;
    bool rule_to_derived = src->kind == NodeKind::And && dst->kind == NodeKind::Or;
    if (!fact_to_rule && !rule_to_derived) {
      out.push_back({e.src, e.dst,
                     std::string("edge ") + std::string(to_string(src->kind)) + " -> " +
                         std::string(to_string(dst->kind)) + " is outside the edge partition"});
    }
  }

  std::map<std::string, std::string> seen_facts;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    std::size_t in = graph.parents(i).size();
    std::size_t outdeg = graph.children(i).size();
    switch (n.kind) {
      case NodeKind::And:
        if (outdeg != 1)
          out.push_back({n.id, "", "derivation node has " + std::to_string(outdeg) +
                                       " outgoing edges (expected 1)"});
        if (in == 0) out.push_back({n.id, "", "derivation node has no preconditions"});
        break;
      case NodeKind::Or:
        if (in == 0) out.push_back({n.id, "", "derived fact has no derivation"});
        break;
      case NodeKind::Leaf:
        if (in != 0) out.push_back({n.id, "", "primitive fact has incoming edges"});
        break;
    }
    if (n.kind != NodeKind::And) {
      if (!n.fact) {
        out.push_back({n.id, "", "fact node without an atom"});
        continue;
      }
      auto [it, inserted] = seen_facts.emplace(n.fact->to_string(), n.id);
      if (!inserted)
        out.push_back({n.id, it->second, "duplicate node for fact " + it->first});
    }
  }
  return out;
}

bool is_acyclic(const AttackGraph& graph) {
  const std::size_t n = graph.nodes().size();
  std::vector<std::size_t> indegree(n);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = graph.parents(i).size();
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::size_t visited = 0;
  while (!ready.empty()) {
    std::size_t v = ready.back();
    ready.pop_back();
    ++visited;
    for (std::size_t c : graph.children(v))
      if (--indegree[c] == 0) ready.push_back(c);
  }
  return visited == n;
}

}  // namespace mlrisk
