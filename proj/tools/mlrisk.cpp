// mlrisk command-line front end.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlrisk/ahp.hpp"
#include "mlrisk/cmlvss.hpp"
#include "mlrisk/datalog.hpp"
#include "mlrisk/error.hpp"
#include "mlrisk/graph_io.hpp"
#include "mlrisk/io.hpp"
#include "mlrisk/risk.hpp"
#include "mlrisk/rulepack.hpp"
#include "mlrisk/service.hpp"

namespace {

using namespace mlrisk;
using nlohmann::json;

constexpr const char* kWeightsEnv = "MLRISK_WEIGHTS";

ahp::WeightModel load_weights(const std::string& path) {
  std::string file = path;
  if (file.empty()) {
    if (const char* env = std::getenv(kWeightsEnv); env != nullptr && *env != '\0') file = env;
  }
  if (file.empty()) return ahp::WeightModel::defaults();
  return ahp::WeightModel::from_json(read_file(file));
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") std::cout << text << (text.ends_with('\n') ? "" : "\n");
  else write_file(out, text);
}

rulepack::Scenario scenario_arg(const std::string& arg) {
  if (std::filesystem::exists(arg)) return rulepack::load_scenario_file(arg);
  return rulepack::load_scenario(arg);
}

datalog::Program rules_program(const std::vector<std::string>& rule_files, const std::vector<std::string>& techniques) {
  if (rule_files.empty()) {
    rulepack::RulepackOptions opts;
    if (!techniques.empty()) opts.techniques = std::set<std::string>(techniques.begin(), techniques.end());
    return rulepack::load_rulepack(opts);
  }
  datalog::Program p;
  for (const auto& f : rule_files) p.merge(datalog::parse_program(read_file(f), f));
  return p;
}

void print_counts(std::ostream& os, const AttackGraph& g) {
  os << "attack graph: " << g.nodes().size() << " nodes (" << g.count(NodeKind::And) << " AND, "
     << g.count(NodeKind::Or) << " OR, " << g.count(NodeKind::Leaf) << " LEAF), " << g.edges().size()
     << " edges, " << g.goals().size() << " goal(s)\n";
}

struct GenerateArgs {
  std::string scenario, facts, goal, out, dot;
  std::vector<std::string> rules, techniques;
};

int cmd_generate(const GenerateArgs& a) {
  datalog::Program program;
  Atom goal;
  if (!a.scenario.empty()) {
    auto s = scenario_arg(a.scenario);
    program = s.program;
    goal = s.goal;
    for (const auto& issue : rulepack::validate_facts(s.facts, rulepack::builtin_registry(), &s.vulnerabilities).issues)
      std::cerr << "warning: " << issue.message << "\n";
  } else {
    if (a.facts.empty()) throw ValidationError("either --scenario or --facts is required");
    auto facts = datalog::parse_program(read_file(a.facts), a.facts);
    for (const auto& issue : rulepack::validate_facts(facts).issues) std::cerr << "warning: " << issue.message << "\n";
    program = rules_program(a.rules, a.techniques);
    program.merge(facts);
  }
  if (!a.goal.empty()) goal = datalog::parse_atom(a.goal);
  if (goal.predicate.empty()) throw ValidationError("--goal is required");

  auto build = datalog::build_attack_graph(program, goal);
  for (const auto& w : build.warnings) std::cerr << "warning: " << w << "\n";
  bool to_stdout = a.out.empty() && a.dot.empty();
  if (!a.out.empty()) write_file(a.out, graph_to_json(build.graph));
  if (!a.dot.empty()) write_file(a.dot, graph_to_dot(build.graph));
  if (to_stdout) std::cout << graph_to_json(build.graph) << "\n";
  print_counts(to_stdout ? std::cerr : std::cout, build.graph);
  return 0;
}

struct RiskArgs {
  std::string graph, vulns, weights, format = "text", out;
  std::vector<std::string> rules;
  bool weighted_impact = false;
  std::size_t cap = 10'000;
  std::size_t limit = 0;
};

int cmd_risk(const RiskArgs& a) {
  auto graph = graph_from_json(read_file(a.graph));
  auto vulns = rulepack::parse_vuln_table(read_file(a.vulns));
  auto program = rules_program(a.rules, {});
  ahp::WeightModel weights = load_weights(a.weights);
  risk::RiskOptions opts;
  opts.paths.cap = a.cap;
  if (a.limit > 0) opts.paths.limit = a.limit;
  if (a.weighted_impact) opts.paths.impact_weights = &weights;
  auto report = risk::assess(graph, program, vulns, opts);
  emit(a.format == "json" ? risk::report_to_json(report) : risk::report_to_text(report), a.out);
  return 0;
}

struct ScoreArgs {
  std::string technique, profile, weights, format = "json", out;
  bool all = false, data_validation = false, feature_extraction = false, ab_testing = false;
};

int cmd_score(const ScoreArgs& a) {
  ahp::WeightModel weights = load_weights(a.weights);
  cmlvss::EnvironmentProfile env{a.data_validation, a.feature_extraction, a.ab_testing};
  std::vector<cmlvss::AttackProfile> profiles;
  if (a.all) profiles = cmlvss::Catalog::builtin().profiles();
  else if (!a.profile.empty()) profiles.push_back(cmlvss::profile_from_json(read_file(a.profile)));
  else if (!a.technique.empty()) profiles.push_back(cmlvss::catalog_lookup(a.technique));
  else throw ValidationError("one of --technique, --profile or --all is required");

  if (a.format == "text") {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    for (const auto& p : profiles) {
      auto s = cmlvss::severity(p, weights, env);
      os << std::left << std::setw(6) << p.id << s.value << "  " << p.name << "\n";
    }
    emit(os.str(), a.out);
    return 0;
  }
  if (profiles.size() == 1) {
    emit(cmlvss::severity_to_json(profiles[0], cmlvss::severity(profiles[0], weights, env)), a.out);
    return 0;
  }
  json all = json::array();
  for (const auto& p : profiles) all.push_back(json::parse(cmlvss::severity_to_json(p, cmlvss::severity(p, weights, env))));
  emit(json{{"schema_version", 1}, {"scores", all}}.dump(2), a.out);
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1", sessions, hierarchy;
  int port = 8080;
};

int cmd_serve(const ServeArgs& a) {
  static ahp::Hierarchy hierarchy =
      a.hierarchy.empty() ? ahp::Hierarchy::builtin() : ahp::Hierarchy::from_json(read_file(a.hierarchy));
  std::optional<std::filesystem::path> dir;
  if (!a.sessions.empty()) dir = a.sessions;
  service::SessionStore store(hierarchy, dir);
  service::Server server(store);
  std::cerr << "elicitation service listening on http://" << a.host << ":" << a.port << "\n";
  if (!server.listen(a.host, a.port)) throw IoError("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

struct AggregateArgs {
  std::string responses, sessions_dir, method = "eigenvector", out;
  std::vector<std::string> sessions;
};

int cmd_aggregate(const AggregateArgs& a) {
  const auto& h = ahp::Hierarchy::builtin();
  ahp::AggregateOptions opts;
  if (a.method == "geometric_mean") opts.method = ahp::WeightMethod::GeometricMean;
  ahp::Aggregation agg;
  try {
    if (!a.responses.empty()) {
      agg = ahp::aggregate_experts(ahp::parse_responses_csv(read_file(a.responses), h), h, opts);
    } else if (!a.sessions_dir.empty()) {
      service::SessionStore store(h, std::filesystem::path(a.sessions_dir));
      agg = store.aggregate(a.sessions.empty() ? store.ids() : a.sessions, opts);
    } else {
      throw ValidationError("one of --responses or --sessions-dir is required");
    }
  } catch (const ahp::InconsistentResponsesError& e) {
    for (const auto& g : e.groups())
      std::cerr << "inconsistent: expert " << g.expert << ", group " << g.group << ", CR " << g.cr << "\n";
    throw;
  }
  for (const auto& w : agg.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "Kendall's W = " << agg.overall.w << (agg.overall.strong ? " (strong agreement)" : "") << "\n";
  emit(agg.model.to_json(h), a.out);
  return 0;
}

struct DemoArgs {
  std::string format = "text", dot, graph_out;
};

int cmd_demo(const DemoArgs& a) {
  auto start = std::chrono::steady_clock::now();
  auto scenario = rulepack::load_scenario("demo");
  auto report = risk::assess_scenario(scenario);
  if (!a.dot.empty()) write_file(a.dot, graph_to_dot(report.graph));
  if (!a.graph_out.empty()) write_file(a.graph_out, graph_to_json(report.graph));
  if (a.format == "json") {
    std::cout << risk::report_to_json(report) << "\n";
  } else {
    std::cout << risk::report_to_text(report);
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::cout << "\ncompleted in " << std::fixed << std::setprecision(1) << ms << " ms\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attack-graph risk assessment for ML production systems"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Build an attack graph from facts and interaction rules");
  generate->add_option("--scenario", gen.scenario, "Built-in scenario name or scenario manifest path");
  generate->add_option("--facts", gen.facts, "Fact file");
  generate->add_option("--rules", gen.rules, "Rule files (default: built-in rulepack)");
  generate->add_option("--techniques", gen.techniques, "Restrict technique rules to these ids")->delimiter(',');
  generate->add_option("--goal", gen.goal, "Goal pattern, e.g. 'evasionAttack4(_, _, _, _)'");
  generate->add_option("--out", gen.out, "Graph JSON output");
  generate->add_option("--dot", gen.dot, "Graphviz DOT output");

  RiskArgs rk;
  auto* risk_cmd = app.add_subcommand("risk", "Propagate likelihoods and rank attack paths");
  risk_cmd->add_option("--graph", rk.graph, "Graph JSON")->required();
  risk_cmd->add_option("--vulns", rk.vulns, "Vulnerability metadata JSON")->required();
  risk_cmd->add_option("--rules", rk.rules, "Rule files for technique annotations (default: built-in)");
  risk_cmd->add_option("--weights", rk.weights, std::string("Weight model JSON (default: $") + kWeightsEnv + " or built-in)");
  risk_cmd->add_flag("--weighted-impact", rk.weighted_impact, "Value impacts by their elicited weights");
  risk_cmd->add_option("--format", rk.format)->check(CLI::IsMember({"text", "json"}));
  risk_cmd->add_option("--limit", rk.limit, "Report only the top N paths");
  risk_cmd->add_option("--cap", rk.cap, "Maximum number of enumerated paths");
  risk_cmd->add_option("--out", rk.out, "Output file (default: stdout)");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Severity of an attack technique");
  score->add_option("--technique", sc.technique, "Catalog technique id (AT1..AT21)");
  score->add_option("--profile", sc.profile, "Attack profile JSON");
  score->add_flag("--all", sc.all, "Score every catalog technique");
  score->add_option("--weights", sc.weights, std::string("Weight model JSON (default: $") + kWeightsEnv + " or built-in)");
  score->add_flag("--data-validation", sc.data_validation, "Pipeline validates incoming data");
  score->add_flag("--feature-extraction", sc.feature_extraction, "Pipeline extracts features");
  score->add_flag("--ab-testing", sc.ab_testing, "Pipeline runs A/B testing");
  score->add_option("--format", sc.format)->check(CLI::IsMember({"text", "json"}));
  score->add_option("--out", sc.out, "Output file (default: stdout)");

  auto* elicit = app.add_subcommand("elicit", "Expert weight elicitation");
  elicit->require_subcommand(1);
  ServeArgs sv;
  auto* serve = elicit->add_subcommand("serve", "Run the questionnaire HTTP service");
  serve->add_option("--host", sv.host);
  serve->add_option("--port", sv.port);
  serve->add_option("--sessions", sv.sessions, "Directory for session event logs");
  serve->add_option("--hierarchy", sv.hierarchy, "Hierarchy JSON (default: built-in)");
  AggregateArgs ag;
  auto* aggregate = elicit->add_subcommand("aggregate", "Aggregate expert judgments into a weight model");
  aggregate->add_option("--responses", ag.responses, "CSV: expert,group,item_a,item_b,ratio");
  aggregate->add_option("--sessions-dir", ag.sessions_dir, "Session log directory");
  aggregate->add_option("--session", ag.sessions, "Session ids (default: all in the directory)");
  aggregate->add_option("--method", ag.method)->check(CLI::IsMember({"eigenvector", "geometric_mean"}));
  aggregate->add_option("--out", ag.out, "Weight model output (default: stdout)");

  DemoArgs dm;
  auto* demo = app.add_subcommand("demo", "Run the built-in demonstration scenario");
  demo->add_option("--format", dm.format)->check(CLI::IsMember({"text", "json"}));
  demo->add_option("--dot", dm.dot, "Write the attack graph as DOT");
  demo->add_option("--graph-out", dm.graph_out, "Write the attack graph as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*risk_cmd) return cmd_risk(rk);
    if (*score) return cmd_score(sc);
    if (*serve) return cmd_serve(sv);
    if (*aggregate) return cmd_aggregate(ag);
    if (*demo) return cmd_demo(dm);
  } catch (const mlrisk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
