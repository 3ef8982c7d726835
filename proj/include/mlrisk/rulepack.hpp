#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mlrisk/datalog.hpp"
#include "mlrisk/metrics.hpp"

namespace mlrisk::rulepack {

enum class Category { Asset, Data, Access, Knowledge, Technique, Network, Plumbing };

std::string_view to_string(Category category);
Category category_from_string(std::string_view text);

struct PredicateInfo {
  std::string name;
  std::size_t arity = 0;
  Category category = Category::Plumbing;
  std::string doc;
  std::vector<std::string> args;
  // Argument holding the vulnerability id, for vulnerability-bearing predicates.
  std::optional<std::size_t> vuln_id_arg;
};

class PredicateRegistry {
 public:
  PredicateRegistry() = default;
  explicit PredicateRegistry(std::vector<PredicateInfo> predicates);

  static PredicateRegistry from_json(std::string_view text);

  const PredicateInfo* find(std::string_view name) const;
  const std::vector<PredicateInfo>& all() const { return predicates_; }
  std::set<std::string> names() const;

  // Registry self-check: trailing digits of a name must equal its arity.
  std::vector<std::string> suffix_mismatches() const;

 private:
  std::vector<PredicateInfo> predicates_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

const PredicateRegistry& builtin_registry();

enum class VulnKind { Traditional, Aml, Enabler };

std::string_view to_string(VulnKind kind);

struct VulnMetadata {
  std::string id;
  VulnKind kind = VulnKind::Traditional;
  // Access complexity for traditional vulnerabilities, attack performance for
  // AML ones; unset for enablers.
  std::optional<Rating> rating;
  ImpactSet impacts;
};

using VulnTable = std::map<std::string, VulnMetadata, std::less<>>;

// {"schema_version": 1, "vulnerabilities": {id: {kind, class, impacts}}}
VulnTable parse_vuln_table(std::string_view json_text);
std::string vuln_table_to_json(const VulnTable& table);

// Vulnerability id carried by `fact` when its predicate is a registered
// vulnerability predicate.
std::optional<std::string> vulnerability_id(const Atom& fact, const PredicateRegistry& registry);

struct RulepackOptions {
  // When set, rules annotated with a threat keep only those whose technique
  // is listed; rules without a threat annotation are always kept.
  std::optional<std::set<std::string>> techniques;
};

std::vector<std::string> rule_file_names();
datalog::Program load_rule_file(std::string_view name);
datalog::Program load_rulepack(const RulepackOptions& options = {});

struct EnvironmentFlags {
  bool data_validation = false;
  bool feature_extraction = false;
  bool ab_testing = false;
};

struct Scenario {
  std::string name;
  std::string description;
  Atom goal;
  std::optional<std::set<std::string>> techniques;
  std::optional<std::size_t> expected_paths;
  EnvironmentFlags environment;
  VulnTable vulnerabilities;
  datalog::Program facts;    // scenario facts only
  datalog::Program program;  // rulepack + facts
};

std::vector<std::string> scenario_names();
// Built-in scenario by name; throws NotFoundError for unknown names.
Scenario load_scenario(std::string_view name);
// Scenario manifest on disk; fact and metadata paths resolve relative to it.
Scenario load_scenario_file(const std::string& manifest_path);

struct ValidationIssue {
  enum class Kind { UnregisteredPredicate, ArityMismatch, OrphanVulnerability };
  Kind kind;
  std::string predicate;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool clean() const { return issues.empty(); }
};

std::string_view to_string(ValidationIssue::Kind kind);

// Flags predicates missing from the registry, arity disagreements with it,
// and vulnerability facts without metadata (when `vulns` is given).
ValidationReport validate_facts(const datalog::Program& program,
                                const PredicateRegistry& registry = builtin_registry(),
                                const VulnTable* vulns = nullptr);

}  // namespace mlrisk::rulepack
