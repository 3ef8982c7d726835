#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlrisk/ahp.hpp"
#include "mlrisk/datalog.hpp"
#include "mlrisk/metrics.hpp"
#include "mlrisk/model.hpp"
#include "mlrisk/rulepack.hpp"

namespace mlrisk::risk {

// Traditional: access complexity High 0.35, Medium 0.61, Low 0.71.
// AML: attack-performance likelihood. Enabler: 1.0.
double vuln_likelihood(const rulepack::VulnMetadata& metadata);

double combine_and(std::span<const double> parents);
// 1 - prod(1 - p), equal to the inclusion-exclusion sum.
double combine_or(std::span<const double> parents);

double node_risk(double likelihood, double impact);

struct LeafAssessment {
  double likelihood = 1.0;
  ImpactSet impacts;
  std::optional<std::string> vulnerability;
};

// One entry per LEAF node. ValidationError when a vulnerability atom has no
// metadata.
std::map<std::string, LeafAssessment> assess_leaves(
    const AttackGraph& graph, const rulepack::VulnTable& vulns,
    const rulepack::PredicateRegistry& registry = rulepack::builtin_registry());

using NodeLikelihood = std::map<std::string, double>;

struct LikelihoodOptions {
  // Initial worklist order (node ids); unlisted nodes follow in id order.
  std::vector<std::string> order_seed;
};

// Worklist evaluation: leaves start processed; a node is popped, assigned
// once all its parents are processed, and pushed back otherwise. Leaves
// missing from `leaf_likelihood` get 1.0. CycleError (naming one strongly
// connected component) when the worklist stops making progress.
NodeLikelihood build_likelihood_equations(const AttackGraph& graph,
                                          const std::map<std::string, double>& leaf_likelihood,
                                          const LikelihoodOptions& options = {});

struct PathExploit {
  std::string node;
  std::string fact;
  std::string vulnerability;
  double likelihood = 1.0;
};

struct PathStep {
  std::string node;
  std::string rule_id;
  std::string label;
  std::string derived;
  std::string technique;  // empty unless the rule names one
};

// One proof tree: a single AND parent chosen at every OR node reached.
struct AttackPath {
  std::string goal;
  std::vector<std::string> nodes;  // sorted ids in the tree
  std::vector<PathStep> phases;    // AND steps, prerequisites first
  std::vector<PathExploit> exploits;
  std::vector<std::string> techniques;
  double likelihood = 1.0;  // product over distinct leaves
  ImpactSet impacts;
  double impact = 0;
  double risk = 0;
};

struct PathOptions {
  std::size_t cap = 10'000;            // ResourceLimitError beyond this
  std::optional<std::size_t> limit;    // keep the top `limit` paths
  // When set, impacts are valued by their AG weights instead of 0.33 each.
  const ahp::WeightModel* impact_weights = nullptr;
};

// `program` supplies rule annotations (techniques); it may be null.
std::vector<AttackPath> enumerate_paths(const AttackGraph& graph,
                                        const std::map<std::string, LeafAssessment>& leaves,
                                        const datalog::Program* program = nullptr,
                                        const PathOptions& options = {});

struct RiskReport {
  std::string scenario;
  AttackGraph graph;
  NodeLikelihood likelihood;
  std::map<std::string, double> goal_risk;  // goal id -> risk
  std::vector<AttackPath> paths;
  std::vector<std::string> warnings;
};

struct RiskOptions {
  PathOptions paths;
  LikelihoodOptions likelihood;
};

RiskReport assess(const AttackGraph& graph, const datalog::Program& program, const rulepack::VulnTable& vulns,
                  const RiskOptions& options = {});

// Generates the graph for a scenario and assesses it. Fact validation
// issues and technique rules without a catalog profile become warnings.
RiskReport assess_scenario(const rulepack::Scenario& scenario, const RiskOptions& options = {});

std::string report_to_json(const RiskReport& report);
std::string report_to_text(const RiskReport& report);

}  // namespace mlrisk::risk
