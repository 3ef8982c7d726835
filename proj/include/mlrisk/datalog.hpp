#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mlrisk/model.hpp"

namespace mlrisk::datalog {

struct PredicateUse {
  std::size_t arity = 0;
  SourcePos first_use;
};

// A parsed set of ground facts and interaction rules.
class Program {
 public:
  const std::vector<Atom>& facts() const { return facts_; }
  const std::vector<Rule>& rules() const { return rules_; }
  const std::map<std::string, PredicateUse>& predicates() const { return predicates_; }

  // Adds a ground fact; duplicates are ignored. Throws ValidationError on a
  // non-ground atom or an arity conflict.
  void add_fact(const Atom& fact, const SourcePos& pos = {});
  // Adds a rule after checking range restriction and arities.
  void add_rule(Rule rule);
  // Records `name/arity` at `pos`, throwing on a conflicting earlier use.
  void register_predicate(const std::string& name, std::size_t arity, const SourcePos& pos);

  // Appends everything from `other`; arity conflicts across the two
  // programs are reported with both sites.
  void merge(const Program& other);

  bool has_fact(const Atom& fact) const { return fact_set_.contains(fact); }
  const Rule* find_rule(std::string_view id) const;

  // Body predicates that are neither facts, rule heads, nor in `declared`.
  std::vector<std::string> undefined_predicates(const std::set<std::string>& declared = {}) const;

 private:
  std::vector<Atom> facts_;
  std::set<Atom> fact_set_;
  std::vector<Rule> rules_;
  std::map<std::string, PredicateUse> predicates_;
  std::map<std::string, std::size_t> rule_ids_;
};

// Parses the rule/fact language:
//   fact(args).
//   head(args) :- b1(args), ..., bn(args).
// with `%` line comments. `%@ key: value` comments annotate the next clause
// (keys `id` and `label` populate Rule::id / Rule::label). `_` is a fresh
// variable per occurrence.
Program parse_program(std::string_view text, const std::string& file = {});

// Parses a single atom such as a goal pattern `evasionAttack4(P,_,_,tampering)`.
// Anonymous variables stay distinct.
Atom parse_atom(std::string_view text);

// Source text that reparses to a structurally identical program.
std::string to_source(const Program& program);

struct TraceEntry {
  std::string rule_id;
  std::map<std::string, std::string> binding;  // variable -> constant text
  Atom derived;
  std::vector<Atom> support;  // ground body atoms in body order
  std::size_t round = 0;      // semi-naive iteration that produced it
};

using DerivationTrace = std::vector<TraceEntry>;

struct EvaluationOptions {
  std::size_t max_derived_atoms = 1'000'000;
};

struct Evaluation {
  // Derived atoms (not already facts) in derivation order.
  std::vector<Atom> derived;
  DerivationTrace trace;
  std::size_t rounds = 0;

  std::set<Atom> derived_set() const { return {derived.begin(), derived.end()}; }
};

// Semi-naive bottom-up evaluation to the least fixpoint. Every distinct
// (rule, support set) instantiation deriving a non-fact atom is recorded in
// the trace, in the order it was found.
Evaluation evaluate(const Program& program, const EvaluationOptions& options = {});

// Substitution that makes `pattern` equal to `ground`, if any.
bool matches(const Atom& pattern, const Atom& ground);

struct GraphBuild {
  AttackGraph graph;
  std::vector<std::string> warnings;
};

// Materializes the derivations backward-reachable from atoms matching
// `goal` into an attack graph. Trace entries are added in trace order and an
// entry is dropped when it would close a cycle, so the result is acyclic and
// every derived atom keeps its first derivation.
GraphBuild build_attack_graph(const Program& program, const Evaluation& evaluation,
                              const Atom& goal);

// Convenience: evaluate then build.
GraphBuild build_attack_graph(const Program& program, const Atom& goal,
                              const EvaluationOptions& options = {});

}  // namespace mlrisk::datalog
