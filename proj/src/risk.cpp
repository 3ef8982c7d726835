#include "mlrisk/risk.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "mlrisk/cmlvss.hpp"
#include "mlrisk/graph_io.hpp"

namespace mlrisk::risk {

using detail::json;

double vuln_likelihood(const rulepack::VulnMetadata& metadata) {
  switch (metadata.kind) {
    case rulepack::VulnKind::Enabler: return 1.0;
    case rulepack::VulnKind::Aml:
      if (!metadata.rating) throw ValidationError("vulnerability '" + metadata.id + "' has no performance class");
      return cmlvss::performance_likelihood(*metadata.rating);
    case rulepack::VulnKind::Traditional:
      if (!metadata.rating) throw ValidationError("vulnerability '" + metadata.id + "' has no access complexity");
      switch (*metadata.rating) {
        case Rating::High: return 0.35;
        case Rating::Medium: return 0.61;
        case Rating::Low: return 0.71;
      }
  }
  return 1.0;
}

double combine_and(std::span<const double> parents) {
  double p = 1.0;
  for (double v : parents) p *= v;
  return p;
}

double combine_or(std::span<const double> parents) {
  double miss = 1.0;
  for (double v : parents) miss *= 1.0 - v;
  return 1.0 - miss;
}

double node_risk(double likelihood, double impact) { return likelihood * impact; }

namespace {

std::optional<Impact> impact_constant(const std::string& text) {
  for (auto i : {Impact::Tampering, Impact::Dos, Impact::Disclosure})
    if (to_string(i) == text) return i;
  return std::nullopt;
}

ImpactSet atom_impacts(const std::optional<Atom>& atom) {
  ImpactSet out;
  if (!atom) return out;
  for (const auto& t : atom->args)
    if (auto i = impact_constant(t.text)) out.insert(*i);
  return out;
}

// Tarjan's algorithm restricted to `active` nodes; returns the first
// component that contains a cycle.
std::vector<std::size_t> cyclic_component(const AttackGraph& g, const std::vector<char>& active) {
  std::size_t n = g.nodes().size();
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::size_t> found;
  int counter = 0;
  std::function<void(std::size_t)> strong = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = 1;
    for (std::size_t w : g.children(v)) {
      if (!active[w]) continue;
      if (index[w] < 0) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = 0;
        comp.push_back(w);
      } while (w != v);
      bool self_loop = std::find(g.children(v).begin(), g.children(v).end(), v) != g.children(v).end();
      if (found.empty() && (comp.size() > 1 || self_loop)) found = std::move(comp);
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (active[v] && index[v] < 0) strong(v);
  std::sort(found.begin(), found.end());
  return found;
}

}  // namespace

std::map<std::string, LeafAssessment> assess_leaves(const AttackGraph& graph, const rulepack::VulnTable& vulns,
                                                    const rulepack::PredicateRegistry& registry) {
  std::map<std::string, LeafAssessment> out;
  for (const auto& n : graph.nodes()) {
    if (n.kind != NodeKind::Leaf) continue;
    LeafAssessment a;
    if (n.fact) {
      if (auto id = rulepack::vulnerability_id(*n.fact, registry)) {
        auto it = vulns.find(*id);
        if (it == vulns.end())
          throw ValidationError("vulnerability '" + *id + "' in " + n.fact->to_string() + " has no metadata");
        a.likelihood = vuln_likelihood(it->second);
        a.impacts = it->second.impacts;
        a.vulnerability = *id;
      }
    }
    out.emplace(n.id, std::move(a));
  }
  return out;
}

NodeLikelihood build_likelihood_equations(const AttackGraph& graph,
                                          const std::map<std::string, double>& leaf_likelihood,
                                          const LikelihoodOptions& options) {
  std::size_t n = graph.nodes().size();
  std::vector<char> processed(n, 0);
  std::vector<double> lh(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = graph.node(i);
    if (node.kind != NodeKind::Leaf) continue;
    auto it = leaf_likelihood.find(node.id);
    lh[i] = it == leaf_likelihood.end() ? 1.0 : it->second;
    if (lh[i] < 0 || lh[i] > 1) throw ValidationError("likelihood of '" + node.id + "' is outside [0, 1]");
    processed[i] = 1;
  }

  std::deque<std::size_t> unprocessed;
  std::vector<char> queued(n, 0);
  for (const auto& id : options.order_seed) {
    auto i = graph.index_of(id);
    if (i && !processed[*i] && !queued[*i]) {
      unprocessed.push_back(*i);
      queued[*i] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!processed[i] && !queued[i]) unprocessed.push_back(i);

  std::size_t stalled = 0;
  std::vector<double> inputs;
  while (!unprocessed.empty()) {
    std::size_t a = unprocessed.front();
    unprocessed.pop_front();
    const auto& parents = graph.parents(a);
    if (std::all_of(parents.begin(), parents.end(), [&](std::size_t k) { return processed[k] != 0; })) {
      inputs.clear();
      std::vector<std::size_t> ordered(parents.begin(), parents.end());
      std::sort(ordered.begin(), ordered.end());
      for (std::size_t k : ordered) inputs.push_back(lh[k]);
      lh[a] = graph.node(a).kind == NodeKind::And ? combine_and(inputs) : combine_or(inputs);
      processed[a] = 1;
      stalled = 0;
    } else {
      unprocessed.push_back(a);
      if (++stalled >= unprocessed.size()) {
        std::vector<char> active(n, 0);
        for (std::size_t i : unprocessed) active[i] = 1;
        auto comp = cyclic_component(graph, active);
        std::string names;
        for (std::size_t i : comp) names += (names.empty() ? "" : ", ") + graph.node(i).label;
        throw CycleError("likelihood equations are cyclic; strongly connected component: {" + names + "}");
      }
    }
  }

  NodeLikelihood out;
  for (std::size_t i = 0; i < n; ++i) out[graph.node(i).id] = lh[i];
  return out;
}

namespace {

class PathEnumerator {
 public:
  PathEnumerator(const AttackGraph& g, std::size_t cap) : g_(g), cap_(cap) {}

  std::vector<std::set<std::size_t>> run(std::size_t goal) {
    trees_.clear();
    seen_.clear();
    State s;
    s.stack.push_back(goal);
    expand(std::move(s));
    return trees_;
  }

 private:
  struct State {
    std::vector<std::size_t> stack;
    std::set<std::size_t> nodes;
  };

  void expand(State s) {
    while (!s.stack.empty()) {
      std::size_t v = s.stack.back();
      s.stack.pop_back();
      if (!s.nodes.insert(v).second) continue;
      const auto& parents = g_.parents(v);
      switch (g_.node(v).kind) {
        case NodeKind::Leaf:
          break;
        case NodeKind::And:
          for (std::size_t p : parents) s.stack.push_back(p);
          break;
        case NodeKind::Or:
          if (parents.empty()) return;  // underivable
          for (std::size_t k = 0; k + 1 < parents.size(); ++k) {
            State branch = s;
            branch.stack.push_back(parents[k]);
            expand(std::move(branch));
          }
          s.stack.push_back(parents.back());
          break;
      }
    }
    if (!seen_.insert(s.nodes).second) return;
    if (trees_.size() >= cap_)
      throw ResourceLimitError("more than " + std::to_string(cap_) + " attack paths; raise the path cap");
    trees_.push_back(std::move(s.nodes));
  }

  const AttackGraph& g_;
  std::size_t cap_;
  std::set<std::set<std::size_t>> seen_;
  std::vector<std::set<std::size_t>> trees_;
};

double value_of(const ImpactSet& impacts, const ahp::WeightModel* weights) {
  return weights != nullptr ? cmlvss::impact_value(impacts, *weights) : cmlvss::impact_value(impacts);
}

AttackPath describe(const AttackGraph& g, std::size_t goal, const std::set<std::size_t>& tree,
                    const std::map<std::string, LeafAssessment>& leaves, const datalog::Program* program,
                    const ahp::WeightModel* weights) {
  AttackPath path;
  path.goal = g.node(goal).id;
  for (std::size_t v : tree) path.nodes.push_back(g.node(v).id);
  std::sort(path.nodes.begin(), path.nodes.end());

  std::set<std::size_t> done;
  std::set<std::string> techniques;
  // Post-order from the goal: prerequisites before the steps that use them.
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    if (!done.insert(v).second) return;
    const auto& node = g.node(v);
    for (std::size_t p : g.parents(v))
      if (tree.contains(p)) visit(p);
    if (node.kind == NodeKind::Leaf) {
      auto it = leaves.find(node.id);
      LeafAssessment a = it == leaves.end() ? LeafAssessment{} : it->second;
      path.likelihood *= a.likelihood;
      path.impacts.insert(a.impacts.begin(), a.impacts.end());
      if (a.vulnerability)
        path.exploits.push_back({node.id, node.label, *a.vulnerability, a.likelihood});
    } else if (node.kind == NodeKind::And) {
      PathStep step{node.id, node.rule_id, node.label, "", ""};
      for (std::size_t c : g.children(v))
        if (tree.contains(c)) step.derived = g.node(c).label;
      if (program != nullptr)
        if (const Rule* r = program->find_rule(node.rule_id)) step.technique = r->technique();
      if (!step.technique.empty()) techniques.insert(step.technique);
      path.phases.push_back(std::move(step));
    }
  };
  visit(goal);
  path.techniques.assign(techniques.begin(), techniques.end());
  ImpactSet goal_impacts = atom_impacts(g.node(goal).fact);
  path.impacts.insert(goal_impacts.begin(), goal_impacts.end());
  path.impact = value_of(path.impacts, weights);
  path.risk = node_risk(path.likelihood, path.impact);
  return path;
}

}  // namespace

std::vector<AttackPath> enumerate_paths(const AttackGraph& graph, const std::map<std::string, LeafAssessment>& leaves,
                                        const datalog::Program* program, const PathOptions& options) {
  if (graph.goals().empty()) throw ValidationError("the attack graph has no goal");
  std::vector<AttackPath> out;
  std::size_t total = 0;
  for (const auto& goal_id : graph.goals()) {
    auto goal = graph.index_of(goal_id);
    if (!goal) throw ValidationError("goal '" + goal_id + "' is not a node");
    PathEnumerator e(graph, options.cap - std::min(options.cap, total));
    for (const auto& tree : e.run(*goal)) out.push_back(describe(graph, *goal, tree, leaves, program, options.impact_weights));
    total = out.size();
  }
  std::stable_sort(out.begin(), out.end(), [](const AttackPath& a, const AttackPath& b) {
    if (a.risk != b.risk) return a.risk > b.risk;
    if (a.likelihood != b.likelihood) return a.likelihood > b.likelihood;
    return a.nodes < b.nodes;
  });
  if (options.limit && out.size() > *options.limit) out.resize(*options.limit);
  return out;
}

RiskReport assess(const AttackGraph& graph, const datalog::Program& program, const rulepack::VulnTable& vulns,
                  const RiskOptions& options) {
  RiskReport r;
  r.graph = graph;
  auto leaves = assess_leaves(graph, vulns);
  std::map<std::string, double> leaf_lh;
  for (const auto& [id, a] : leaves) leaf_lh[id] = a.likelihood;
  r.likelihood = build_likelihood_equations(graph, leaf_lh, options.likelihood);
  if (graph.empty()) return r;

  for (const auto& goal_id : graph.goals()) {
    auto goal = *graph.index_of(goal_id);
    ImpactSet impacts = atom_impacts(graph.node(goal).fact);
    std::set<std::size_t> seen{goal};
    std::vector<std::size_t> stack{goal};
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      if (graph.node(v).kind == NodeKind::Leaf) {
        const auto& a = leaves.at(graph.node(v).id);
        impacts.insert(a.impacts.begin(), a.impacts.end());
      }
      for (std::size_t p : graph.parents(v))
        if (seen.insert(p).second) stack.push_back(p);
    }
    r.goal_risk[goal_id] = node_risk(r.likelihood.at(goal_id), value_of(impacts, options.paths.impact_weights));
  }
  r.paths = enumerate_paths(graph, leaves, &program, options.paths);
  return r;
}

RiskReport assess_scenario(const rulepack::Scenario& scenario, const RiskOptions& options) {
  auto build = datalog::build_attack_graph(scenario.program, scenario.goal);
  RiskReport r = assess(build.graph, scenario.program, scenario.vulnerabilities, options);
  r.scenario = scenario.name;
  r.warnings = build.warnings;
  auto report = rulepack::validate_facts(scenario.facts, rulepack::builtin_registry(), &scenario.vulnerabilities);
  for (const auto& issue : report.issues) r.warnings.push_back(issue.message);
  std::set<std::string> missing;
  for (const auto& n : build.graph.nodes()) {
    if (n.kind != NodeKind::And) continue;
    const Rule* rule = scenario.program.find_rule(n.rule_id);
    if (rule == nullptr) continue;
    std::string t = rule->technique();
    if (!t.empty() && cmlvss::Catalog::builtin().find(t) == nullptr && missing.insert(t).second)
      r.warnings.push_back("technique " + t + " used by rule " + rule->id + " has no catalog profile");
  }
  if (scenario.expected_paths && !options.paths.limit && *scenario.expected_paths != r.paths.size())
    r.warnings.push_back("scenario expects " + std::to_string(*scenario.expected_paths) + " attack paths, found " +
                         std::to_string(r.paths.size()));
  return r;
}

std::string report_to_json(const RiskReport& report) {
  json nodes = json::array();
  for (const auto& n : report.graph.nodes()) {
    json j = {{"id", n.id}, {"kind", std::string(to_string(n.kind))}, {"label", n.label},
              {"likelihood", report.likelihood.at(n.id)}};
    nodes.push_back(std::move(j));
  }
  json goals = json::array();
  for (const auto& g : report.graph.goals())
    goals.push_back({{"id", g},
                     {"label", report.graph.find(g)->label},
                     {"likelihood", report.likelihood.at(g)},
                     {"risk", report.goal_risk.at(g)}});
  json paths = json::array();
  std::size_t rank = 0;
  for (const auto& p : report.paths) {
    json phases = json::array();
    for (const auto& s : p.phases) {
      json step = {{"node", s.node}, {"rule_id", s.rule_id}, {"label", s.label}, {"derived", s.derived}};
      if (!s.technique.empty()) step["technique"] = s.technique;
      phases.push_back(std::move(step));
    }
    json exploits = json::array();
    for (const auto& e : p.exploits)
      exploits.push_back(
          {{"node", e.node}, {"fact", e.fact}, {"vulnerability", e.vulnerability}, {"likelihood", e.likelihood}});
    json impacts = json::array();
    for (auto i : p.impacts) impacts.push_back(std::string(to_string(i)));
    json leaves = json::array();
    for (const auto& id : p.nodes) {
      const GraphNode* n = report.graph.find(id);
      if (n->kind == NodeKind::Leaf)
        leaves.push_back({{"node", id}, {"fact", n->label}, {"likelihood", report.likelihood.at(id)}});
    }
    paths.push_back({{"rank", ++rank},
                     {"goal", p.goal},
                     {"risk", p.risk},
                     {"likelihood", p.likelihood},
                     {"impact", p.impact},
                     {"impacts", impacts},
                     {"techniques", p.techniques},
                     {"exploits", exploits},
                     {"phases", phases},
                     {"leaves", leaves},
                     {"nodes", p.nodes}});
  }
  json out = {{"schema_version", detail::kSchemaVersion},
              {"scenario", report.scenario},
              {"goals", goals},
              {"paths", paths},
              {"nodes", nodes},
              {"warnings", report.warnings}};
  return out.dump(2);
}

std::string report_to_text(const RiskReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  const auto& g = report.graph;
  if (!report.scenario.empty()) out << "Scenario: " << report.scenario << "\n";
  out << "Attack graph: " << g.nodes().size() << " nodes (" << g.count(NodeKind::And) << " AND, "
      << g.count(NodeKind::Or) << " OR, " << g.count(NodeKind::Leaf) << " LEAF), " << g.edges().size()
      << " edges\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  for (const auto& id : g.goals())
    out << "Goal " << g.find(id)->label << ": likelihood " << report.likelihood.at(id) << ", risk "
        << report.goal_risk.at(id) << "\n";
  std::size_t rank = 0;
  for (const auto& p : report.paths) {
    out << "\nPath " << ++rank << ": risk " << p.risk << " = likelihood " << p.likelihood << " x impact "
        << p.impact;
    if (!p.techniques.empty()) {
      out << " [";
      for (std::size_t i = 0; i < p.techniques.size(); ++i) out << (i ? ", " : "") << p.techniques[i];
      out << "]";
    }
    out << "\n";
    for (const auto& e : p.exploits)
      out << "  exploit " << e.vulnerability << " (" << e.likelihood << "): " << e.fact << "\n";
    std::size_t phase = 0;
    for (const auto& s : p.phases) out << "  " << ++phase << ". " << s.label << " => " << s.derived << "\n";
  }
  if (report.paths.empty()) out << "\nNo attack paths.\n";
  return out.str();
}

}  // namespace mlrisk::risk
