#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mlrisk {

struct SourcePos {
  std::string file;
  int line = 0;
  int column = 0;

  std::string to_string() const;
};

// A flat Datalog term. Variables start with an uppercase letter or '_';
// constants are lowercase symbols, quoted strings (quotes kept in `text`)
// or integers.
struct Term {
  enum class Kind { Variable, Constant };

  Kind kind = Kind::Constant;
  std::string text;

  static Term variable(std::string name) { return {Kind::Variable, std::move(name)}; }
  static Term constant(std::string value) { return {Kind::Constant, std::move(value)}; }

  bool is_variable() const { return kind == Kind::Variable; }

  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term&, const Term&) = default;
};

struct Atom {
  std::string predicate;
  std::vector<Term> args;

  std::size_t arity() const { return args.size(); }
  bool is_ground() const;
  std::string to_string() const;

  friend bool operator==(const Atom&, const Atom&) = default;
  friend auto operator<=>(const Atom&, const Atom&) = default;
};

struct Rule {
  std::string id;
  std::string label;
  Atom head;
  std::vector<Atom> body;
  SourcePos pos;
  // Free-form `%@ key: value` annotations attached in the source file.
  std::map<std::string, std::string> annotations;

  // Technique id (e.g. "AT3") when the rule models an attack technique.
  std::string technique() const;
  std::string to_string() const;

  friend bool operator==(const Rule& a, const Rule& b) {
    return a.id == b.id && a.label == b.label && a.head == b.head &&
           a.body == b.body && a.annotations == b.annotations;
  }
};

// Stable 64-bit FNV-1a digest rendered as 16 lowercase hex digits.
std::string content_id(std::string_view content);

enum class NodeKind { And, Or, Leaf };

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view text);

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::Leaf;
  std::string label;
  std::optional<Atom> fact;  // set for Or and Leaf nodes
  std::string rule_id;       // set for And nodes
};

struct GraphEdge {
  std::string src;
  std::string dst;

  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
  friend auto operator<=>(const GraphEdge&, const GraphEdge&) = default;
};

// Logical attack graph (N_r, N_p, N_d, E, L, G). Immutable once constructed;
// nodes, edges and goals are kept in id order so equal inputs serialize to
// equal bytes.
class AttackGraph {
 public:
  AttackGraph() = default;
  AttackGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges,
              std::vector<std::string> goals);

  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::vector<std::string>& goals() const { return goals_; }

  bool empty() const { return nodes_.empty(); }
  std::optional<std::size_t> index_of(std::string_view id) const;
  const GraphNode& node(std::size_t index) const { return nodes_[index]; }
  const GraphNode* find(std::string_view id) const;

  // Adjacency over node indices; edges to unknown ids are dropped here but
  // still reported by edge_partition_check.
  const std::vector<std::size_t>& parents(std::size_t index) const { return in_[index]; }
  const std::vector<std::size_t>& children(std::size_t index) const { return out_[index]; }

  std::size_t count(NodeKind kind) const;

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::vector<std::string> goals_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::vector<std::size_t>> out_;
};

struct GraphViolation {
  std::string src;
  std::string dst;  // empty for node-level violations
  std::string reason;
};

// Checks the edge partition E ⊆ ((N_p ∪ N_d) × N_r) ∪ (N_r × N_d), the
// degree constraints of each node kind, and fact deduplication. Returns an
// empty list for a well-formed graph.
std::vector<GraphViolation> edge_partition_check(const AttackGraph& graph);

// True when the graph has no directed cycle.
bool is_acyclic(const AttackGraph& graph);

}  // namespace mlrisk
