#include <gtest/gtest.h>

#include <map>

#include "mlrisk/cmlvss.hpp"
#include "mlrisk/error.hpp"
#include "mlrisk/rulepack.hpp"

using namespace mlrisk;
using namespace mlrisk::rulepack;

namespace {

const std::map<std::string, std::string> kAttributeOf = {
    {"pipelineAccess4", "AC1"},         {"modelAccess4", "AC2"},
    {"predictionAccess4", "AC3"},       {"rawDataAccess6", "AC4"},
    {"trainingDataAccess6", "AC5"},     {"labeledDataAccess6", "AC6"},
    {"validationDataAccess6", "AC7"},   {"surrogateDataAccess4", "AC8"},
    {"sensorDataAccess4", "AC11"},      {"perfectKnowledge3", "AK1"},
    {"modelKnowledge3", "AK2"},         {"hyperparameterKnowledge4", "AK3"},
    {"algorithmKnowledge4", "AK4"},     {"trainingDataKnowledge4", "AK5"},
    {"rawDataKnowledge4", "AK6"},       {"dataPropertyKnowledge4", "AK7"},
    {"taskKnowledge4", "AK8"}};

// Requirement profile read off a technique rule's body.
cmlvss::AttackProfile profile_of(const Rule& rule) {
  cmlvss::AttackProfile p;
  for (const auto& atom : rule.body) {
    std::string attr;
    if (atom.predicate == "queryAccess5") {
      attr = atom.args[3].text == "score" ? "AC9" : "AC10";
    } else if (auto it = kAttributeOf.find(atom.predicate); it != kAttributeOf.end()) {
      attr = it->second;
    } else {
      continue;
    }
    cmlvss::Level level = cmlvss::Level::Full;
    if (atom.arity() >= 4 && !atom.args.back().is_variable())
      level = cmlvss::level_from_string(atom.args.back().text);
    p.set_requirement(attr, std::max(level, p.requirement(attr)));
  }
  return p;
}

const Rule* rule(const datalog::Program& p, std::string_view id) {
  const Rule* r = p.find_rule(id);
  EXPECT_NE(r, nullptr) << id;
  return r;
}

}  // namespace

TEST(Registry, CoversEveryPredicateOfTheRulepack) {
  auto program = load_rulepack();
  const auto& registry = builtin_registry();
  auto report = validate_facts(program, registry);
  for (const auto& issue : report.issues) ADD_FAILURE() << issue.message;
  EXPECT_TRUE(report.clean());
}

TEST(Registry, NumericSuffixesMatchArity) {
  EXPECT_TRUE(builtin_registry().suffix_mismatches().empty());
  PredicateRegistry bad({{"model7", 6, Category::Asset, "", {}, std::nullopt}});
  ASSERT_EQ(bad.suffix_mismatches().size(), 1u);
}

TEST(Registry, VulnerabilityArgument) {
  Atom a = datalog::parse_atom("vulExists5(host, cve1, httpd, remote, pEscalation)");
  EXPECT_EQ(vulnerability_id(a, builtin_registry()), "cve1");
  Atom m = datalog::parse_atom("vulModel5(pl, alg, m, h, evasionVulnerability)");
  EXPECT_EQ(vulnerability_id(m, builtin_registry()), "evasionVulnerability");
  EXPECT_FALSE(vulnerability_id(datalog::parse_atom("malicious1(a)"), builtin_registry()));
}

TEST(Rulepack, EveryFileParsesAndIsRangeRestricted) {
  auto files = rule_file_names();
  EXPECT_GE(files.size(), 5u);
  std::size_t rules = 0;
  for (const auto& f : files) {
    auto p = load_rule_file(f);
    EXPECT_TRUE(p.facts().empty()) << f;
    rules += p.rules().size();
  }
  EXPECT_EQ(load_rulepack().rules().size(), rules);
}

TEST(Rulepack, SourceRoundTrip) {
  auto program = load_rulepack();
  auto again = datalog::parse_program(datalog::to_source(program), "roundtrip");
  ASSERT_EQ(again.rules().size(), program.rules().size());
  for (std::size_t i = 0; i < program.rules().size(); ++i) {
    EXPECT_EQ(again.rules()[i].head, program.rules()[i].head);
    EXPECT_EQ(again.rules()[i].body, program.rules()[i].body);
    EXPECT_EQ(again.rules()[i].id, program.rules()[i].id);
  }
}

TEST(Rulepack, ModelKnowledgeRoutes) {
  auto program = load_rulepack();
  const Rule* access = rule(program, "know-model-access");
  ASSERT_NE(access, nullptr);
  EXPECT_EQ(access->head.predicate, "modelKnowledge3");
  ASSERT_EQ(access->body.size(), 3u);
  EXPECT_EQ(access->body[2].predicate, "modelAccess4");
  const Rule* pub = rule(program, "know-model-public");
  ASSERT_NE(pub, nullptr);
  EXPECT_EQ(pub->body.back().predicate, "publicModel1");
}

TEST(Rulepack, DecisionBasedEvasionPreconditions) {
  auto program = load_rulepack();
  const Rule* r = rule(program, "T1-AT3");
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->technique(), "AT3");
  EXPECT_EQ(r->body.size(), 5u);
  EXPECT_NE(std::find(r->body.begin(), r->body.end(),
                      datalog::parse_atom("queryAccess5(Principal, PipelineID, ModelID, decision, full)")),
            r->body.end());
}

TEST(Rulepack, ClusterPropagation) {
  auto program = load_rulepack();
  program.merge(datalog::parse_program(R"(
    rawData2(d1, gateway).
    clusterWorker3(w1, gateway, master).
    clusterWorker3(w2, gateway, master).
  )"));
  auto eval = datalog::evaluate(program);
  auto derived = eval.derived_set();
  EXPECT_TRUE(derived.contains(datalog::parse_atom("rawData2(d1, w1)")));
  EXPECT_TRUE(derived.contains(datalog::parse_atom("rawData2(d1, w2)")));
}

TEST(Rulepack, TechniqueFilterKeepsSupportRules) {
  RulepackOptions opts;
  opts.techniques = std::set<std::string>{"AT3"};
  auto program = load_rulepack(opts);
  EXPECT_NE(program.find_rule("T1-AT3"), nullptr);
  EXPECT_EQ(program.find_rule("T1-AT7"), nullptr);
  EXPECT_NE(program.find_rule("know-model-access"), nullptr);
}

TEST(Rulepack, SystematicRulesMatchTheCatalog) {
  auto program = load_rulepack();
  std::size_t checked = 0;
  for (const auto& r : program.rules()) {
    if (r.technique().empty() || r.annotations.contains("form")) continue;
    const auto& expected = cmlvss::catalog_lookup(r.technique());
    auto actual = profile_of(r);
    for (const auto& attr : cmlvss::attribute_ids())
      EXPECT_EQ(actual.requirement(attr), expected.requirement(attr)) << r.id << " " << attr;
    ++checked;
  }
  EXPECT_GE(checked, 20u);
}

TEST(Rulepack, EveryCatalogTechniqueHasARule) {
  auto program = load_rulepack();
  std::set<std::string> covered;
  for (const auto& r : program.rules())
    if (!r.technique().empty()) covered.insert(r.technique());
  for (const auto& p : cmlvss::Catalog::builtin().profiles()) EXPECT_TRUE(covered.contains(p.id)) << p.id;
}

TEST(Validation, DemoFactsAreClean) {
  auto s = load_scenario("demo");
  auto report = validate_facts(s.facts, builtin_registry(), &s.vulnerabilities);
  for (const auto& issue : report.issues) ADD_FAILURE() << issue.message;
}

TEST(Validation, ArityMismatch) {
  auto p = datalog::parse_program("model6(a, b).", "bad.P");
  auto report = validate_facts(p);
  ASSERT_EQ(report.issues.size(), 1u);
  EXPECT_EQ(report.issues[0].kind, ValidationIssue::Kind::ArityMismatch);
  EXPECT_NE(report.issues[0].message.find("bad.P:1"), std::string::npos);
}

TEST(Validation, UnregisteredPredicate) {
  auto report = validate_facts(datalog::parse_program("madeUp1(a)."));
  ASSERT_EQ(report.issues.size(), 1u);
  EXPECT_EQ(report.issues[0].kind, ValidationIssue::Kind::UnregisteredPredicate);
}

TEST(Validation, OrphanVulnerability) {
  auto p = datalog::parse_program("vulExists5(h, cve9, svc, remote, pEscalation).");
  VulnTable vulns;
  auto report = validate_facts(p, builtin_registry(), &vulns);
  ASSERT_EQ(report.issues.size(), 1u);
  EXPECT_EQ(report.issues[0].kind, ValidationIssue::Kind::OrphanVulnerability);
  EXPECT_NE(report.issues[0].message.find("cve9"), std::string::npos);
}

TEST(VulnTable, ParseAndRoundTrip) {
  auto table = parse_vuln_table(R"({"schema_version": 1, "vulnerabilities": {
    "a": {"kind": "traditional", "class": "Low", "impacts": ["tampering"]},
    "b": {"kind": "aml", "class": "high", "impacts": ["dos", "AG3"]},
    "c": {"kind": "enabler"}}})");
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table.at("a").rating, Rating::Low);
  EXPECT_EQ(table.at("b").impacts, (ImpactSet{Impact::Dos, Impact::Disclosure}));
  EXPECT_FALSE(table.at("c").rating);
  auto again = parse_vuln_table(vuln_table_to_json(table));
  EXPECT_EQ(again.size(), 3u);
  EXPECT_EQ(again.at("b").impacts, table.at("b").impacts);
}

TEST(VulnTable, Errors) {
  EXPECT_THROW(parse_vuln_table("{"), ValidationError);
  EXPECT_THROW(parse_vuln_table(R"({"schema_version": 2, "vulnerabilities": {}})"), ValidationError);
  EXPECT_THROW(parse_vuln_table(R"({"vulnerabilities": {"a": {"kind": "aml"}}})"), ValidationError);
  EXPECT_THROW(parse_vuln_table(R"({"vulnerabilities": {"a": {"kind": "enabler", "class": "Low"}}})"),
               ValidationError);
  EXPECT_THROW(parse_vuln_table(R"({"vulnerabilities": {"a": {"kind": "other"}}})"), ValidationError);
}

TEST(Scenario, UnknownNameListsAvailable) {
  try {
    load_scenario("nope");
    FAIL();
  } catch (const NotFoundError& e) {
    EXPECT_NE(std::string(e.what()).find("demo"), std::string::npos);
  }
}

TEST(Scenario, EmptyScenarioWarns) {
  auto s = load_scenario("empty");
  auto build = datalog::build_attack_graph(s.program, s.goal);
  EXPECT_TRUE(build.graph.empty());
  ASSERT_EQ(build.warnings.size(), 1u);
}

TEST(Scenario, DemoGraphIsWellFormed) {
  auto s = load_scenario("demo");
  EXPECT_EQ(s.expected_paths, 2u);
  auto build = datalog::build_attack_graph(s.program, s.goal);
  EXPECT_TRUE(build.warnings.empty());
  EXPECT_TRUE(edge_partition_check(build.graph).empty());
  EXPECT_TRUE(is_acyclic(build.graph));
  ASSERT_EQ(build.graph.goals().size(), 1u);
  auto goal = *build.graph.index_of(build.graph.goals()[0]);
  EXPECT_EQ(build.graph.parents(goal).size(), 2u);
}

TEST(Scenario, EnvironmentFlagsAssertFacts) {
  auto s = load_scenario("demo");
  EXPECT_FALSE(s.program.has_fact(datalog::parse_atom("pipelineHasABTesting(fraudPipeline)")));
}
