#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>

#include "mlrisk/datalog.hpp"

namespace mlrisk::datalog {

namespace {

std::string join_sorted(std::vector<std::string> parts) {
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  std::string out;
  for (const auto& p : parts) {
    out += p;
    out += ';';
  }
  return out;
}

// Atom-level derivation graph used while deciding which trace entries to keep.
class DerivationDag {
 public:
  std::size_t id(const std::string& atom) {
    auto [it, inserted] = ids_.emplace(atom, out_.size());
    if (inserted) out_.emplace_back();
    return it->second;
  }

  void add_edge(std::size_t from, std::size_t to) { out_[from].push_back(to); }

  bool reaches_any(std::size_t from, const std::set<std::size_t>& targets) const {
    std::vector<char> seen(out_.size(), 0);
    std::vector<std::size_t> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      if (targets.contains(v)) return true;
      for (std::size_t w : out_[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    return false;
  }

 private:
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<std::vector<std::size_t>> out_;
};

}  // namespace

GraphBuild build_attack_graph(const Program& program, const Evaluation& evaluation,
                              const Atom& goal) {
  GraphBuild out;

  // Keep trace entries in order unless one would make its head reach itself.
  DerivationDag dag;
  std::set<std::size_t> has_derivation;
  std::vector<const TraceEntry*> kept;
  for (const auto& entry : evaluation.trace) {
    std::size_t head = dag.id(entry.derived.to_string());
    std::set<std::size_t> supports;
    for (const auto& s : entry.support) supports.insert(dag.id(s.to_string()));
    if (has_derivation.contains(head) && dag.reaches_any(head, supports)) continue;
    for (std::size_t s : supports) dag.add_edge(s, head);
    has_derivation.insert(head);
    kept.push_back(&entry);
  }

  std::map<Atom, std::vector<const TraceEntry*>> by_head;
  for (const auto* e : kept) by_head[e->derived].push_back(e);

  std::vector<Atom> goal_atoms;
  for (const auto& [atom, entries] : by_head)
    if (matches(goal, atom)) goal_atoms.push_back(atom);
  for (const auto& fact : program.facts())
    if (matches(goal, fact)) goal_atoms.push_back(fact);
  if (goal_atoms.empty()) {
    out.warnings.push_back("no derived or primitive fact matches goal " + goal.to_string() +
                           "; the attack graph is empty");
    return out;
  }

  auto fact_id = [](const Atom& a) { return content_id("fact|" + a.to_string()); };
  auto rule_id = [](const TraceEntry& e) {
    std::vector<std::string> parts;
    for (const auto& s : e.support) parts.push_back(s.to_string());
    return content_id("rule|" + e.rule_id + "|" + e.derived.to_string() + "|" +
                      join_sorted(std::move(parts)));
  };

  std::map<std::string, GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::set<Atom> visited;
  std::deque<Atom> queue(goal_atoms.begin(), goal_atoms.end());
  while (!queue.empty()) {
    Atom atom = std::move(queue.front());
    queue.pop_front();
    if (!visited.insert(atom).second) continue;

    auto it = by_head.find(atom);
    bool derived = it != by_head.end();
    GraphNode fact_node;
    fact_node.id = fact_id(atom);
    fact_node.kind = derived ? NodeKind::Or : NodeKind::Leaf;
    fact_node.label = atom.to_string();
    fact_node.fact = atom;
    nodes.emplace(fact_node.id, fact_node);
    if (!derived) continue;

    for (const TraceEntry* e : it->second) {
      GraphNode rule_node;
      rule_node.id = rule_id(*e);
      rule_node.kind = NodeKind::And;
      const Rule* rule = program.find_rule(e->rule_id);
      rule_node.label = rule != nullptr ? rule->label : e->rule_id;
      rule_node.rule_id = e->rule_id;
      nodes.emplace(rule_node.id, rule_node);
      edges.push_back({rule_node.id, fact_node.id});
      for (const auto& s : e->support) {
        edges.push_back({fact_id(s), rule_node.id});
        if (!visited.contains(s)) queue.push_back(s);
      }
    }
  }

  std::vector<GraphNode> node_list;
  node_list.reserve(nodes.size());
  for (auto& [id, n] : nodes) node_list.push_back(std::move(n));
  std::vector<std::string> goals;
  for (const auto& g : goal_atoms) goals.push_back(fact_id(g));
  out.graph = AttackGraph(std::move(node_list), std::move(edges), std::move(goals));
  return out;
}

GraphBuild build_attack_graph(const Program& program, const Atom& goal,
                              const EvaluationOptions& options) {
  return build_attack_graph(program, evaluate(program, options), goal);
}

}  // namespace mlrisk::datalog
