#include "mlrisk/rulepack.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>

#include "json_util.hpp"
#include "mlrisk/error.hpp"
#include "mlrisk/io.hpp"
#include "mlrisk/resources.hpp"

namespace mlrisk::rulepack {

using detail::json;

namespace {

constexpr std::string_view kRuleDir = "rulepack/";
constexpr std::string_view kScenarioDir = "scenarios/";

std::string_view require_resource(std::string_view path) {
  auto r = resource(path);
  if (!r) throw NotFoundError("built-in resource '" + std::string(path) + "' not found");
  return *r;
}

}  // namespace

std::string_view to_string(Category category) {
  switch (category) {
    case Category::Asset: return "asset";
    case Category::Data: return "data";
    case Category::Access: return "access";
    case Category::Knowledge: return "knowledge";
    case Category::Technique: return "technique";
    case Category::Network: return "network";
    case Category::Plumbing: return "plumbing";
  }
  return "plumbing";
}

Category category_from_string(std::string_view text) {
  for (auto c : {Category::Asset, Category::Data, Category::Access, Category::Knowledge,
                 Category::Technique, Category::Network, Category::Plumbing}) {
    if (to_string(c) == text) return c;
  }
  throw ValidationError("unknown predicate category '" + std::string(text) + "'");
}

PredicateRegistry::PredicateRegistry(std::vector<PredicateInfo> predicates)
    : predicates_(std::move(predicates)) {
  for (std::size_t i = 0; i < predicates_.size(); ++i) {
    const auto& p = predicates_[i];
    if (!index_.emplace(p.name, i).second)
      throw ValidationError("predicate '" + p.name + "' registered twice");
    if (p.vuln_id_arg && *p.vuln_id_arg >= p.arity)
      throw ValidationError("predicate '" + p.name + "' has an out-of-range vuln_id_arg");
  }
}

PredicateRegistry PredicateRegistry::from_json(std::string_view text) {
  const std::string what = "predicate registry";
  json doc = detail::parse_json(text, what);
  detail::check_schema(doc, what);
  std::vector<PredicateInfo> out;
  const json entries = detail::field<json>(doc, "predicates", what);
  for (const auto& e : entries) {
    PredicateInfo p;
    p.name = detail::field<std::string>(e, "name", what);
    p.arity = detail::field<std::size_t>(e, "arity", what);
    p.category = category_from_string(detail::field<std::string>(e, "category", what));
    p.doc = e.value("doc", "");
    p.args = e.value("args", std::vector<std::string>{});
    if (e.contains("vuln_id_arg")) p.vuln_id_arg = e["vuln_id_arg"].get<std::size_t>();
    out.push_back(std::move(p));
  }
  return PredicateRegistry(std::move(out));
}

const PredicateInfo* PredicateRegistry::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &predicates_[it->second];
}

std::set<std::string> PredicateRegistry::names() const {
  std::set<std::string> out;
  for (const auto& p : predicates_) out.insert(p.name);
  return out;
}

std::vector<std::string> PredicateRegistry::suffix_mismatches() const {
  std::vector<std::string> out;
  for (const auto& p : predicates_) {
    std::size_t end = p.name.size();
    std::size_t start = end;
    while (start > 0 && std::isdigit(static_cast<unsigned char>(p.name[start - 1])) != 0) --start;
    if (start == end) continue;  // no numeric suffix
    if (std::stoul(p.name.substr(start)) != p.arity)
      out.push_back(p.name + " has arity " + std::to_string(p.arity));
  }
  return out;
}

const PredicateRegistry& builtin_registry() {
  static const PredicateRegistry registry =
      PredicateRegistry::from_json(require_resource("registry.json"));
  return registry;
}

std::string_view to_string(VulnKind kind) {
  switch (kind) {
    case VulnKind::Traditional: return "traditional";
    case VulnKind::Aml: return "aml";
    case VulnKind::Enabler: return "enabler";
  }
  return "traditional";
}

VulnTable parse_vuln_table(std::string_view json_text) {
  const std::string what = "vulnerability metadata";
  json doc = detail::parse_json(json_text, what);
  detail::check_schema(doc, what);
  VulnTable out;
  const json entries = detail::field<json>(doc, "vulnerabilities", what);
  if (!entries.is_object()) throw ValidationError(what + ": 'vulnerabilities' must be an object");
  for (const auto& [id, e] : entries.items()) {
    const std::string ctx = what + " '" + id + "'";
    VulnMetadata m;
    m.id = id;
    auto kind = detail::field<std::string>(e, "kind", ctx);
    if (kind == "traditional") m.kind = VulnKind::Traditional;
    else if (kind == "aml") m.kind = VulnKind::Aml;
    else if (kind == "enabler") m.kind = VulnKind::Enabler;
    else throw ValidationError(ctx + ": unknown kind '" + kind + "'");
    if (m.kind != VulnKind::Enabler) {
      m.rating = rating_from_string(detail::field<std::string>(e, "class", ctx));
    } else if (e.contains("class")) {
      throw ValidationError(ctx + ": enablers carry no class");
    }
    for (const auto& i : e.value("impacts", std::vector<std::string>{}))
      m.impacts.insert(impact_from_string(i));
    out.emplace(id, std::move(m));
  }
  return out;
}

std::string vuln_table_to_json(const VulnTable& table) {
  json vulns = json::object();
  for (const auto& [id, m] : table) {
    json e;
    e["kind"] = std::string(to_string(m.kind));
    if (m.rating) e["class"] = std::string(to_string(*m.rating));
    json impacts = json::array();
    for (auto i : m.impacts) impacts.push_back(std::string(to_string(i)));
    e["impacts"] = impacts;
    vulns[id] = e;
  }
  return json{{"schema_version", detail::kSchemaVersion}, {"vulnerabilities", vulns}}.dump(2);
}

std::optional<std::string> vulnerability_id(const Atom& fact, const PredicateRegistry& registry) {
  const PredicateInfo* p = registry.find(fact.predicate);
  if (p == nullptr || !p->vuln_id_arg || *p->vuln_id_arg >= fact.arity()) return std::nullopt;
  return fact.args[*p->vuln_id_arg].text;
}

std::vector<std::string> rule_file_names() {
  std::vector<std::string> out;
  for (const auto& name : resource_names())
    if (name.starts_with(kRuleDir) && name.ends_with(".P")) out.push_back(name.substr(kRuleDir.size()));
  return out;
}

datalog::Program load_rule_file(std::string_view name) {
  std::string path = std::string(kRuleDir) + std::string(name);
  return datalog::parse_program(require_resource(path), path);
}

datalog::Program load_rulepack(const RulepackOptions& options) {
  datalog::Program out;
  for (const auto& file : rule_file_names()) {
    datalog::Program part = load_rule_file(file);
    for (const auto& rule : part.rules()) {
      if (options.techniques && rule.annotations.contains("threat") &&
          !options.techniques->contains(rule.technique()))
        continue;
      out.add_rule(rule);
    }
  }
  return out;
}

namespace {

Scenario build_scenario(std::string_view manifest_text, const std::string& manifest_name,
                        const std::function<std::string(const std::string&)>& fetch) {
  const std::string what = "scenario " + manifest_name;
  json doc = detail::parse_json(manifest_text, what);
  detail::check_schema(doc, what);
  Scenario s;
  s.name = detail::field<std::string>(doc, "name", what);
  s.description = doc.value("description", "");
  s.goal = datalog::parse_atom(detail::field<std::string>(doc, "goal", what));
  if (doc.contains("techniques"))
    s.techniques = doc["techniques"].get<std::set<std::string>>();
  if (doc.contains("expected_paths")) s.expected_paths = doc["expected_paths"].get<std::size_t>();
  if (doc.contains("environment")) {
    const auto& env = doc["environment"];
    s.environment.data_validation = env.value("data_validation", false);
    s.environment.feature_extraction = env.value("feature_extraction", false);
    s.environment.ab_testing = env.value("ab_testing", false);
  }
  auto facts_file = detail::field<std::string>(doc, "facts", what);
  s.facts = datalog::parse_program(fetch(facts_file), facts_file);
  if (doc.contains("vulnerabilities"))
    s.vulnerabilities = parse_vuln_table(fetch(doc["vulnerabilities"].get<std::string>()));

  RulepackOptions opts;
  opts.techniques = s.techniques;
  s.program = load_rulepack(opts);
  s.program.merge(s.facts);
  // Environment flags assert the corresponding facts for every model's pipeline.
  std::set<std::string> pipelines;
  for (const auto& f : s.facts.facts())
    if (f.predicate == "model6") pipelines.insert(f.args[0].text);
  for (const auto& pl : pipelines) {
    if (s.environment.data_validation)
      s.program.add_fact(Atom{"pipelineHasDataValidation", {Term::constant(pl)}});
    if (s.environment.feature_extraction)
      s.program.add_fact(Atom{"pipelineHasFeatureExtraction", {Term::constant(pl)}});
    if (s.environment.ab_testing)
      s.program.add_fact(Atom{"pipelineHasABTesting", {Term::constant(pl)}});
  }
  return s;
}

}  // namespace

std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const auto& name : resource_names()) {
    if (!name.starts_with(kScenarioDir) || !name.ends_with(".json") || name.ends_with(".vulns.json"))
      continue;
    std::string base = name.substr(kScenarioDir.size());
    out.push_back(base.substr(0, base.size() - 5));
  }
  return out;
}

Scenario load_scenario(std::string_view name) {
  auto manifest = resource(std::string(kScenarioDir) + std::string(name) + ".json");
  if (!manifest) {
    std::string known;
    for (const auto& n : scenario_names()) known += (known.empty() ? "" : ", ") + n;
    throw NotFoundError("unknown scenario '" + std::string(name) + "' (available: " + known + ")");
  }
  return build_scenario(*manifest, std::string(name), [](const std::string& file) {
    return std::string(require_resource(std::string(kScenarioDir) + file));
  });
}

Scenario load_scenario_file(const std::string& manifest_path) {
  std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  return build_scenario(read_file(manifest_path), manifest_path, [&](const std::string& file) {
    return read_file((base / file).string());
  });
}

std::string_view to_string(ValidationIssue::Kind kind) {
  switch (kind) {
    case ValidationIssue::Kind::UnregisteredPredicate: return "unregistered_predicate";
    case ValidationIssue::Kind::ArityMismatch: return "arity_mismatch";
    case ValidationIssue::Kind::OrphanVulnerability: return "orphan_vulnerability";
  }
  return "unregistered_predicate";
}

ValidationReport validate_facts(const datalog::Program& program, const PredicateRegistry& registry,
                                const VulnTable* vulns) {
  ValidationReport report;
  using Kind = ValidationIssue::Kind;
  for (const auto& [name, use] : program.predicates()) {
    const PredicateInfo* p = registry.find(name);
    if (p == nullptr) {
      report.issues.push_back({Kind::UnregisteredPredicate, name,
                               "predicate '" + name + "' (first used at " + use.first_use.to_string() +
                                   ") is not registered"});
    } else if (p->arity != use.arity) {
      report.issues.push_back({Kind::ArityMismatch, name,
                               "predicate '" + name + "' used with arity " + std::to_string(use.arity) +
                                   " at " + use.first_use.to_string() + " but registered with arity " +
                                   std::to_string(p->arity)});
    }
  }
  if (vulns != nullptr) {
    std::set<std::string> reported;
    for (const auto& f : program.facts()) {
      auto id = vulnerability_id(f, registry);
      if (!id || vulns->contains(*id) || !reported.insert(*id).second) continue;
      report.issues.push_back({Kind::OrphanVulnerability, f.predicate,
                               "vulnerability '" + *id + "' in " + f.to_string() + " has no metadata"});
    }
  }
  return report;
}

}  // namespace mlrisk::rulepack
