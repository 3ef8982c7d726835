#include <gtest/gtest.h>

#include <random>

#include "mlrisk/datalog.hpp"
#include "mlrisk/error.hpp"
#include "support/naive_datalog.hpp"

using namespace mlrisk;
using namespace mlrisk::datalog;

namespace {

const char* kReach = R"(
edge(a, b).
edge(b, c).
edge(c, a).
edge(c, d).
reach(X, Y) :- edge(X, Y).
reach(X, Z) :- reach(X, Y), edge(Y, Z).
)";

}  // namespace

TEST(Parser, RuleWithThreeBodyAtoms) {
  auto p = parse_program(
      "execCode(P, H, root) :-\n"
      "    vulExists(H, V, Prog),\n"
      "    networkService(H, Prog, Proto, Port, root),\n"
      "    netAccess(P, H, Proto, Port).\n");
  ASSERT_EQ(p.rules().size(), 1u);
  EXPECT_EQ(p.facts().size(), 0u);
  const Rule& r = p.rules()[0];
  EXPECT_EQ(r.head.predicate, "execCode");
  EXPECT_EQ(r.body.size(), 3u);
  EXPECT_TRUE(r.head.args[2] == Term::constant("root"));
  EXPECT_EQ(r.label, "execCode");
}

TEST(Parser, EmptyInput) {
  auto p = parse_program("");
  EXPECT_TRUE(p.facts().empty());
  EXPECT_TRUE(p.rules().empty());
  auto q = parse_program("% only a comment\n\n");
  EXPECT_TRUE(q.facts().empty());
}

TEST(Parser, SingleFact) {
  auto p = parse_program("malicious1(attacker).");
  ASSERT_EQ(p.facts().size(), 1u);
  EXPECT_EQ(p.facts()[0].to_string(), "malicious1(attacker)");
  EXPECT_TRUE(p.rules().empty());
}

TEST(Parser, ZeroArityAndQuotedConstants) {
  auto p = parse_program("flag.\nother().\nf('Hello, world', \"x\", -12).");
  ASSERT_EQ(p.facts().size(), 3u);
  EXPECT_EQ(p.facts()[0].arity(), 0u);
  EXPECT_EQ(p.facts()[1].arity(), 0u);
  EXPECT_EQ(p.facts()[2].args[0].text, "'Hello, world'");
  EXPECT_EQ(p.facts()[2].args[2].text, "-12");
}

TEST(Parser, ReportsPosition) {
  try {
    parse_program("ok(a).\nbad(a, b\n", "x.P");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("x.P:3:"), std::string::npos);
  }
  try {
    parse_program("foo(a) :- bar(a) baz(a).");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_EQ(e.column(), 18);
  }
}

TEST(Parser, RejectsFunctionSymbols) {
  EXPECT_THROW(parse_program("p(f(a))."), ParseError);
}

TEST(Parser, ArityConflictNamesBothSites) {
  try {
    parse_program("p(a).\np(a, b).\n", "c.P");
    FAIL();
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("c.P:1:1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("c.P:2:1"), std::string::npos) << msg;
  }
}

TEST(Parser, RangeRestriction) {
  EXPECT_THROW(parse_program("p(X, Y) :- q(X)."), ValidationError);
  EXPECT_THROW(parse_program("p(X)."), ValidationError);
}

TEST(Parser, AnonymousVariablesAreDistinct) {
  auto p = parse_program("p(X) :- q(X, _, _).");
  const auto& body = p.rules()[0].body[0];
  EXPECT_TRUE(body.args[1].is_variable());
  EXPECT_NE(body.args[1].text, body.args[2].text);
  auto g = parse_atom("goal(_, _)");
  EXPECT_NE(g.args[0].text, g.args[1].text);
}

TEST(Parser, Annotations) {
  auto p = parse_program(
      "%@ id: r-1\n%@ technique: AT3\n%@ label: some attack\nh(X) :- b(X).\n"
      "% plain comment\nh2(X) :- b(X).\n",
      "dir/pack.P");
  ASSERT_EQ(p.rules().size(), 2u);
  EXPECT_EQ(p.rules()[0].id, "r-1");
  EXPECT_EQ(p.rules()[0].label, "some attack");
  EXPECT_EQ(p.rules()[0].technique(), "AT3");
  EXPECT_EQ(p.rules()[1].id, "pack.P:h2#1");
  EXPECT_TRUE(p.rules()[1].annotations.empty());
}

TEST(Parser, RoundTrip) {
  auto p = parse_program(kReach, "reach.P");
  auto q = parse_program(to_source(p), "again.P");
  EXPECT_EQ(p.facts(), q.facts());
  EXPECT_EQ(p.rules(), q.rules());
}

TEST(Evaluate, TransitiveClosureWithCycle) {
  auto p = parse_program(kReach);
  auto ev = evaluate(p);
  auto model = ev.derived_set();
  EXPECT_EQ(model.size(), 12u);  // 3 nodes on the cycle reach 4 nodes each
  EXPECT_TRUE(model.contains(parse_atom("reach(a, a)")));
  EXPECT_TRUE(model.contains(parse_atom("reach(b, d)")));
  EXPECT_FALSE(model.contains(parse_atom("reach(d, a)")));
  EXPECT_GE(ev.rounds, 3u);
}

TEST(Evaluate, TraceEntriesAreRuleInstances) {
  auto p = parse_program(kReach);
  auto ev = evaluate(p);
  std::set<std::tuple<std::string, Atom, std::set<Atom>>> seen;
  for (const auto& e : ev.trace) {
    const Rule* r = p.find_rule(e.rule_id);
    ASSERT_NE(r, nullptr);
    EXPECT_EQ(testing_support::substitute(r->head, e.binding), e.derived);
    ASSERT_EQ(e.support.size(), r->body.size());
    for (std::size_t i = 0; i < r->body.size(); ++i)
      EXPECT_EQ(testing_support::substitute(r->body[i], e.binding), e.support[i]);
    std::set<Atom> sup(e.support.begin(), e.support.end());
    EXPECT_TRUE(seen.emplace(e.rule_id, e.derived, sup).second) << "duplicate trace entry";
  }
}

TEST(Evaluate, DerivedAtomCap) {
  auto p = parse_program(kReach);
  EvaluationOptions opts;
  opts.max_derived_atoms = 5;
  EXPECT_THROW(evaluate(p, opts), ResourceLimitError);
  opts.max_derived_atoms = 12;
  EXPECT_NO_THROW(evaluate(p, opts));
}

TEST(Evaluate, FactsAreNotRederived) {
  auto p = parse_program("a(x).\nb(x).\na(X) :- b(X).\n");
  auto ev = evaluate(p);
  EXPECT_TRUE(ev.derived.empty());
  EXPECT_TRUE(ev.trace.empty());
}

TEST(Evaluate, MatchesNaiveOracleOnRandomPrograms) {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 200; ++i) {
    auto p = testing_support::random_program(rng);
    auto expected = testing_support::naive_model(p);
    auto ev = evaluate(p);
    std::set<Atom> got(p.facts().begin(), p.facts().end());
    got.insert(ev.derived.begin(), ev.derived.end());
    ASSERT_EQ(got, expected) << "program " << i << ":\n" << to_source(p);
    EXPECT_EQ(ev.derived.size(), ev.derived_set().size());
  }
}

TEST(Matches, Patterns) {
  EXPECT_TRUE(matches(parse_atom("g(X, _, t)"), parse_atom("g(a, b, t)")));
  EXPECT_FALSE(matches(parse_atom("g(X, X)"), parse_atom("g(a, b)")));
  EXPECT_TRUE(matches(parse_atom("g(X, X)"), parse_atom("g(a, a)")));
  EXPECT_FALSE(matches(parse_atom("g(X)"), parse_atom("h(a)")));
  EXPECT_FALSE(matches(parse_atom("g(X)"), parse_atom("g(a, b)")));
}

TEST(GraphBuilder, CyclicProgramYieldsAcyclicWellFormedGraph) {
  auto p = parse_program(kReach);
  auto build = build_attack_graph(p, parse_atom("reach(a, d)"));
  EXPECT_TRUE(build.warnings.empty());
  const auto& g = build.graph;
  EXPECT_TRUE(is_acyclic(g));
  auto violations = edge_partition_check(g);
  for (const auto& v : violations) ADD_FAILURE() << v.src << " " << v.dst << " " << v.reason;
  ASSERT_EQ(g.goals().size(), 1u);
  EXPECT_EQ(g.find(g.goals()[0])->kind, NodeKind::Or);
  EXPECT_GT(g.count(NodeKind::Leaf), 0u);
}

TEST(GraphBuilder, RandomProgramsStayWellFormed) {
  std::mt19937_64 rng(7);
  int built = 0;
  for (int i = 0; i < 200; ++i) {
    auto p = testing_support::random_program(rng);
    auto ev = evaluate(p);
    if (ev.derived.empty()) continue;
    Atom goal = ev.derived.back();
    for (auto& t : goal.args) t = Term::variable("_G" + std::to_string(&t - goal.args.data()));
    auto build = build_attack_graph(p, ev, goal);
    EXPECT_TRUE(is_acyclic(build.graph)) << to_source(p);
    EXPECT_TRUE(edge_partition_check(build.graph).empty()) << to_source(p);
    ++built;
  }
  EXPECT_GT(built, 50);
}

TEST(GraphBuilder, EmptyGoalWarns) {
  auto p = parse_program(kReach);
  auto build = build_attack_graph(p, parse_atom("reach(d, a)"));
  EXPECT_TRUE(build.graph.empty());
  ASSERT_EQ(build.warnings.size(), 1u);
}

TEST(GraphBuilder, DeterministicIds) {
  auto p = parse_program(kReach);
  auto a = build_attack_graph(p, parse_atom("reach(X, d)"));
  auto b = build_attack_graph(p, parse_atom("reach(X, d)"));
  ASSERT_EQ(a.graph.nodes().size(), b.graph.nodes().size());
  for (std::size_t i = 0; i < a.graph.nodes().size(); ++i)
    EXPECT_EQ(a.graph.nodes()[i].id, b.graph.nodes()[i].id);
  EXPECT_EQ(a.graph.edges(), b.graph.edges());
  EXPECT_EQ(a.graph.goals().size(), 3u);  // a, b, c; d has no outgoing edge
  for (const auto& n : a.graph.nodes()) EXPECT_EQ(n.id.size(), 16u);
}
