// Semi-naive bottom-up evaluation.
//
// Each relation stores its tuples in insertion order, so "old" and "delta"
// are id ranges: tuples below old_end were known before the current round,
// tuples in [old_end, cur_end) are the delta, and anything appended during
// the round is invisible until the next one.
#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "mlrisk/datalog.hpp"
#include "mlrisk/error.hpp"

namespace mlrisk::datalog {

namespace {

using Sym = std::uint32_t;
using TupleId = std::uint32_t;

struct VecHash {
  std::size_t operator()(const std::vector<Sym>& v) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (Sym s : v) {
      h ^= s + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

class SymbolTable {
 public:
  Sym intern(const std::string& s) {
    auto [it, inserted] = ids_.emplace(s, static_cast<Sym>(names_.size()));
    if (inserted) names_.push_back(s);
    return it->second;
  }
  const std::string& name(Sym s) const { return names_[s]; }

 private:
  std::unordered_map<std::string, Sym> ids_;
  std::vector<std::string> names_;
};

struct Relation {
  std::string name;
  std::size_t arity = 0;
  std::vector<std::vector<Sym>> tuples;
  std::unordered_map<std::vector<Sym>, TupleId, VecHash> lookup;
  // column -> value -> ascending tuple ids
  std::vector<std::unordered_map<Sym, std::vector<TupleId>>> columns;
  std::size_t fact_count = 0;

  // Returns {id, inserted}.
  std::pair<TupleId, bool> insert(std::vector<Sym> tuple) {
    auto it = lookup.find(tuple);
    if (it != lookup.end()) return {it->second, false};
    auto id = static_cast<TupleId>(tuples.size());
    if (columns.size() != arity) columns.resize(arity);
    for (std::size_t c = 0; c < arity; ++c) columns[c][tuple[c]].push_back(id);
    lookup.emplace(tuple, id);
    tuples.push_back(std::move(tuple));
    return {id, true};
  }
};

struct Slot {
  bool is_var = false;
  std::uint32_t value = 0;  // variable slot or symbol
};

struct CompiledAtom {
  std::size_t relation = 0;
  std::vector<Slot> args;
};

struct CompiledRule {
  const Rule* rule = nullptr;
  CompiledAtom head;
  std::vector<CompiledAtom> body;
  std::vector<std::string> var_names;
};

struct Range {
  TupleId lo = 0;
  TupleId hi = 0;
};

class Evaluator {
 public:
  Evaluator(const Program& program, const EvaluationOptions& options)
      : program_(program), options_(options) {}

  Evaluation run() {
    for (const auto& [name, use] : program_.predicates()) relation_for(name, use.arity);
    for (const auto& fact : program_.facts()) {
      auto& rel = relations_[relation_for(fact.predicate, fact.arity())];
      std::vector<Sym> tuple;
      tuple.reserve(fact.arity());
      for (const auto& t : fact.args) tuple.push_back(symbols_.intern(t.text));
      rel.insert(std::move(tuple));
    }
    for (auto& rel : relations_) rel.fact_count = rel.tuples.size();
    for (const auto& rule : program_.rules()) compile(rule);

    std::vector<TupleId> old_end(relations_.size(), 0);
    std::vector<TupleId> cur_end(relations_.size());
    for (std::size_t r = 0; r < relations_.size(); ++r)
      cur_end[r] = static_cast<TupleId>(relations_[r].tuples.size());

    std::size_t round = 0;
    while (true) {
      bool any_delta = false;
      for (std::size_t r = 0; r < relations_.size(); ++r) any_delta |= cur_end[r] > old_end[r];
      if (!any_delta) break;

      for (const auto& rule : rules_) {
        for (std::size_t j = 0; j < rule.body.size(); ++j) {
          std::size_t rel = rule.body[j].relation;
          if (cur_end[rel] == old_end[rel]) continue;
          std::vector<Range> ranges(rule.body.size());
          for (std::size_t i = 0; i < rule.body.size(); ++i) {
            std::size_t ri = rule.body[i].relation;
            if (i < j) ranges[i] = {0, old_end[ri]};
            else if (i == j) ranges[i] = {old_end[ri], cur_end[ri]};
            else ranges[i] = {0, cur_end[ri]};
          }
          std::vector<std::size_t> order;
          order.push_back(j);
          for (std::size_t i = 0; i < rule.body.size(); ++i)
            if (i != j) order.push_back(i);
          std::vector<std::int64_t> binding(rule.var_names.size(), -1);
          std::vector<TupleId> support(rule.body.size());
          join(rule, order, ranges, 0, binding, support, round);
        }
      }

      old_end = cur_end;
      for (std::size_t r = 0; r < relations_.size(); ++r)
        cur_end[r] = static_cast<TupleId>(relations_[r].tuples.size());
      ++round;
    }
    result_.rounds = round;
    return std::move(result_);
  }

 private:
  std::size_t relation_for(const std::string& name, std::size_t arity) {
    auto it = relation_ids_.find(name);
    if (it != relation_ids_.end()) return it->second;
    Relation rel;
    rel.name = name;
    rel.arity = arity;
    rel.columns.resize(arity);
    relations_.push_back(std::move(rel));
    relation_ids_.emplace(name, relations_.size() - 1);
    return relations_.size() - 1;
  }

  CompiledAtom compile_atom(const Atom& atom, std::unordered_map<std::string, std::uint32_t>& vars,
                            std::vector<std::string>& names) {
    CompiledAtom out;
    out.relation = relation_for(atom.predicate, atom.arity());
    for (const auto& t : atom.args) {
      Slot s;
      if (t.is_variable()) {
        auto [it, inserted] = vars.emplace(t.text, static_cast<std::uint32_t>(names.size()));
        if (inserted) names.push_back(t.text);
        s.is_var = true;
        s.value = it->second;
      } else {
        s.value = symbols_.intern(t.text);
      }
      out.args.push_back(s);
    }
    return out;
  }

  void compile(const Rule& rule) {
    CompiledRule c;
    c.rule = &rule;
    std::unordered_map<std::string, std::uint32_t> vars;
    for (const auto& b : rule.body) c.body.push_back(compile_atom(b, vars, c.var_names));
    c.head = compile_atom(rule.head, vars, c.var_names);
    rules_.push_back(std::move(c));
  }

  void join(const CompiledRule& rule, const std::vector<std::size_t>& order,
            const std::vector<Range>& ranges, std::size_t depth,
            std::vector<std::int64_t>& binding, std::vector<TupleId>& support, std::size_t round) {
    if (depth == order.size()) {
      emit(rule, binding, support, round);
      return;
    }
    std::size_t pos = order[depth];
    const CompiledAtom& atom = rule.body[pos];
    const Relation& rel = relations_[atom.relation];
    Range range = ranges[pos];
    if (range.lo >= range.hi) return;

    // Pick the first argument with a known value to drive an index lookup.
    const std::vector<TupleId>* candidates = nullptr;
    for (std::size_t c = 0; c < atom.args.size(); ++c) {
      const Slot& s = atom.args[c];
      std::int64_t value = s.is_var ? binding[s.value] : static_cast<std::int64_t>(s.value);
      if (value < 0) continue;
      auto it = rel.columns[c].find(static_cast<Sym>(value));
      if (it == rel.columns[c].end()) return;
      candidates = &it->second;
      break;
    }

    std::vector<std::uint32_t> newly_bound;
    auto try_tuple = [&](TupleId id) {
      const auto& tuple = rel.tuples[id];
      newly_bound.clear();
      bool ok = true;
      for (std::size_t c = 0; c < atom.args.size() && ok; ++c) {
        const Slot& s = atom.args[c];
        if (!s.is_var) {
          ok = tuple[c] == s.value;
        } else if (binding[s.value] < 0) {
          binding[s.value] = tuple[c];
          newly_bound.push_back(s.value);
        } else {
          ok = binding[s.value] == static_cast<std::int64_t>(tuple[c]);
        }
      }
      if (ok) {
        support[pos] = id;
        std::vector<std::uint32_t> undo = newly_bound;
        join(rule, order, ranges, depth + 1, binding, support, round);
        for (auto v : undo) binding[v] = -1;
      } else {
        for (auto v : newly_bound) binding[v] = -1;
      }
    };

    if (candidates != nullptr) {
      auto first = std::lower_bound(candidates->begin(), candidates->end(), range.lo);
      // Copy the bound: the index may grow while we recurse.
      std::size_t begin = static_cast<std::size_t>(first - candidates->begin());
      std::size_t size = candidates->size();
      for (std::size_t k = begin; k < size; ++k) {
        TupleId id = (*candidates)[k];
        if (id >= range.hi) break;
        try_tuple(id);
      }
    } else {
      for (TupleId id = range.lo; id < range.hi; ++id) try_tuple(id);
    }
  }

  Atom to_atom(std::size_t relation, TupleId id) const {
    const Relation& rel = relations_[relation];
    Atom a;
    a.predicate = rel.name;
    for (Sym s : rel.tuples[id]) a.args.push_back(Term::constant(symbols_.name(s)));
    return a;
  }

  void emit(const CompiledRule& rule, const std::vector<std::int64_t>& binding,
            const std::vector<TupleId>& support, std::size_t round) {
    std::vector<Sym> head;
    head.reserve(rule.head.args.size());
    for (const Slot& s : rule.head.args)
      head.push_back(s.is_var ? static_cast<Sym>(binding[s.value]) : s.value);

    Relation& rel = relations_[rule.head.relation];
    auto existing = rel.lookup.find(head);
    if (existing != rel.lookup.end() && existing->second < rel.fact_count) return;

    // Identity of an instantiation: rule, head tuple, and the support set.
    std::vector<std::uint64_t> key;
    key.push_back(reinterpret_cast<std::uintptr_t>(rule.rule));
    for (Sym s : head) key.push_back(s);
    std::vector<std::uint64_t> sorted;
    for (std::size_t i = 0; i < support.size(); ++i)
      sorted.push_back((static_cast<std::uint64_t>(rule.body[i].relation) << 32) | support[i]);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    key.insert(key.end(), sorted.begin(), sorted.end());
    std::string key_bytes(reinterpret_cast<const char*>(key.data()), key.size() * sizeof(std::uint64_t));
    if (!seen_instantiations_.insert(std::move(key_bytes)).second) return;

    auto [id, inserted] = rel.insert(head);
    if (inserted) {
      if (result_.derived.size() >= options_.max_derived_atoms) {
        throw ResourceLimitError("derived-atom count exceeded the limit of " +
                                 std::to_string(options_.max_derived_atoms));
      }
      result_.derived.push_back(to_atom(rule.head.relation, id));
    }

    TraceEntry entry;
    entry.rule_id = rule.rule->id;
    for (std::size_t v = 0; v < rule.var_names.size(); ++v)
      if (binding[v] >= 0) entry.binding[rule.var_names[v]] = symbols_.name(static_cast<Sym>(binding[v]));
    entry.derived = to_atom(rule.head.relation, id);
    for (std::size_t i = 0; i < support.size(); ++i)
      entry.support.push_back(to_atom(rule.body[i].relation, support[i]));
    entry.round = round;
    result_.trace.push_back(std::move(entry));
  }

  const Program& program_;
  EvaluationOptions options_;
  SymbolTable symbols_;
  std::vector<Relation> relations_;
  std::unordered_map<std::string, std::size_t> relation_ids_;
  std::vector<CompiledRule> rules_;
  std::unordered_set<std::string> seen_instantiations_;
  Evaluation result_;
};

}  // namespace

Evaluation evaluate(const Program& program, const EvaluationOptions& options) {
  return Evaluator(program, options).run();
}

bool matches(const Atom& pattern, const Atom& ground) {
  if (pattern.predicate != ground.predicate || pattern.arity() != ground.arity()) return false;
  std::map<std::string, std::string> binding;
  for (std::size_t i = 0; i < pattern.args.size(); ++i) {
    const Term& p = pattern.args[i];
    const Term& g = ground.args[i];
    if (!p.is_variable()) {
      if (p.text != g.text) return false;
      continue;
    }
    auto [it, inserted] = binding.emplace(p.text, g.text);
    if (!inserted && it->second != g.text) return false;
  }
  return true;
}

}  // namespace mlrisk::datalog
