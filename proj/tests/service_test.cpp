#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mlrisk/error.hpp"
#include "mlrisk/service.hpp"

using namespace mlrisk;
using namespace mlrisk::service;
using nlohmann::json;

namespace {

const ahp::Hierarchy& H() { return ahp::Hierarchy::builtin(); }

// Powers of two keep every ratio on the 1/9..9 scale and the matrix
// perfectly consistent.
std::map<std::string, std::vector<double>> power_weights(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> k(0, 3);
  std::map<std::string, std::vector<double>> out;
  for (const auto& g : H().groups())
    for (std::size_t i = 0; i < g.items.size(); ++i) out[g.path].push_back(1 << k(rng));
  return out;
}

std::vector<Judgment> judgments(const std::map<std::string, std::vector<double>>& weights) {
  std::vector<Judgment> out;
  for (const auto& g : H().groups()) {
    const auto& w = weights.at(g.path);
    for (std::size_t i = 0; i < g.items.size(); ++i)
      for (std::size_t j = i + 1; j < g.items.size(); ++j)
        out.push_back({g.path, g.items[i].id, g.items[j].id, w[i] / w[j]});
  }
  return out;
}

json judgment_json(const Judgment& j) {
  return {{"group", j.group}, {"item_a", j.item_a}, {"item_b", j.item_b}, {"ratio", j.ratio}};
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("mlrisk-sessions-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server = std::make_unique<Server>(store);
    port = server->start_background();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  void TearDown() override { server->stop(); }

  std::string create(const std::string& expert) {
    auto res = client->Post("/sessions", json{{"expert", expert}}.dump(), "application/json");
    EXPECT_EQ(res->status, 201);
    return json::parse(res->body)["id"];
  }
  void answer(const std::string& id, const std::vector<Judgment>& js) {
    for (const auto& j : js) {
      auto res = client->Put("/sessions/" + id + "/judgments", judgment_json(j).dump(), "application/json");
      ASSERT_EQ(res->status, 200) << res->body;
    }
  }

  SessionStore store{H()};
  std::unique_ptr<Server> server;
  int port = 0;
  std::unique_ptr<httplib::Client> client;
};

}  // namespace

TEST(Judgment, JsonForms) {
  auto a = judgment_from_json(R"({"group":"severity","item_a":"attacker_model","item_b":"attack_impact","ratio":3})");
  EXPECT_EQ(a.ratio, 3.0);
  auto b = judgment_from_json(R"({"group":"g","item_a":"x","item_b":"y","ratio":"1/5"})");
  EXPECT_DOUBLE_EQ(b.ratio, 0.2);
  auto c = judgment_from_json(R"({"group":"g","item_a":"x","item_b":"y","preferred":"b","intensity":4})");
  EXPECT_DOUBLE_EQ(c.ratio, 0.25);
  auto d = judgment_from_json(R"({"group":"g","item_a":"x","item_b":"y","preferred":"equal"})");
  EXPECT_EQ(d.ratio, 1.0);
  EXPECT_THROW(judgment_from_json(R"({"group":"g","item_a":"x","item_b":"y","preferred":"c","intensity":2})"),
               ValidationError);
  EXPECT_THROW(judgment_from_json(R"({"group":"g","item_a":"x","item_b":"y","ratio":true})"), ValidationError);
  EXPECT_THROW(judgment_from_json(R"({"group":"g","item_a":"x"})"), ValidationError);
  EXPECT_THROW(judgment_from_json("not json"), ValidationError);
}

TEST(Session, LifecycleAndStatus) {
  Session s("s1", "alice", H());
  EXPECT_EQ(s.status(), Status::Open);
  EXPECT_EQ(s.unanswered().size(), H().groups().size());
  for (const auto& j : judgments(power_weights(1))) s.apply(j);
  EXPECT_TRUE(s.unanswered().empty());
  EXPECT_EQ(s.status(), Status::Consistent);
  for (const auto& [g, cr] : s.consistency_map()) EXPECT_NEAR(cr, 0, 1e-9) << g;
  EXPECT_THROW(s.apply({"severity", "attacker_model", "attack_impact", 2.5}), ValidationError);
  EXPECT_THROW(s.apply({"nowhere", "a", "b", 2}), ValidationError);
  EXPECT_THROW(s.apply({"severity", "attacker_model", "zzz", 2}), ValidationError);
}

TEST(Session, InconsistentGroupKeepsItOpen) {
  Session s("s1", "alice", H());
  for (const auto& j : judgments(power_weights(2))) s.apply(j);
  s.apply({"severity", "attacker_model", "attack_impact", 9});
  s.apply({"severity", "attack_impact", "attack_complexity", 9});
  s.apply({"severity", "attack_complexity", "attacker_model", 9});
  EXPECT_GE(s.consistency("severity"), ahp::kConsistencyThreshold);
  EXPECT_EQ(s.status(), Status::Open);
}

TEST(Store, SubmitRules) {
  SessionStore store(H());
  auto s = store.create("bob");
  EXPECT_THROW(store.get("missing"), NotFoundError);
  EXPECT_THROW(store.create(""), ValidationError);
  try {
    store.submit(s->id());
    FAIL();
  } catch (const ConflictError& e) {
    EXPECT_EQ(e.unanswered().size(), H().groups().size());
  }
  for (const auto& j : judgments(power_weights(3))) store.apply(s->id(), j);
  EXPECT_EQ(store.submit(s->id())->status(), Status::Submitted);
  EXPECT_THROW(store.submit(s->id()), ConflictError);
  EXPECT_THROW(store.apply(s->id(), judgments(power_weights(3)).front()), ConflictError);
}

TEST(Store, AggregateRequiresSubmittedSessions) {
  SessionStore store(H());
  auto a = store.create("a");
  for (const auto& j : judgments(power_weights(4))) store.apply(a->id(), j);
  EXPECT_THROW(store.aggregate({a->id()}), ConflictError);
  EXPECT_THROW(store.aggregate({"missing"}), NotFoundError);
  store.submit(a->id());
  auto agg = store.aggregate({a->id()});
  auto w = power_weights(4);
  const auto& g = H().groups().front();
  double total = 0;
  for (double x : w.at(g.path)) total += x;
  for (std::size_t i = 0; i < g.items.size(); ++i)
    EXPECT_NEAR(agg.model.local_weight(g.path, g.items[i].id), w.at(g.path)[i] / total, 1e-12);
}

TEST(Store, ConcurrentWritersOnSeparateSessions) {
  SessionStore store(H());
  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) ids.push_back(store.create("e" + std::to_string(i))->id());
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] {
      for (const auto& j : judgments(power_weights(100 + i))) store.apply(ids[i], j);
      store.submit(ids[i]);
    });
  // Readers see consistent snapshots while writers run.
  for (int k = 0; k < 200; ++k)
    for (const auto& id : ids) EXPECT_NO_THROW(store.get(id)->consistency_map());
  for (auto& t : threads) t.join();
  for (const auto& id : ids) EXPECT_EQ(store.get(id)->status(), Status::Submitted);
  EXPECT_NO_THROW(store.aggregate(ids));
}

TEST(Store, ReplaysPersistedSessions) {
  TempDir dir;
  std::string open_id, done_id;
  {
    SessionStore store(H(), dir.path);
    open_id = store.create("open")->id();
    store.apply(open_id, {"severity", "attacker_model", "attack_impact", 5});
    done_id = store.create("done")->id();
    for (const auto& j : judgments(power_weights(5))) store.apply(done_id, j);
    store.submit(done_id);
  }
  SessionStore again(H(), dir.path);
  EXPECT_EQ(again.ids().size(), 2u);
  const auto& m = again.get(open_id)->matrices().at("severity");
  EXPECT_EQ(m(*m.index_of("attacker_model"), *m.index_of("attack_impact")), 5.0);
  EXPECT_EQ(again.get(open_id)->expert(), "open");
  EXPECT_EQ(again.get(done_id)->status(), Status::Submitted);
  EXPECT_NO_THROW(again.aggregate({done_id}));
}

TEST_F(ServerTest, HierarchyEndpoint) {
  auto res = client->Get("/hierarchy");
  ASSERT_EQ(res->status, 200);
  auto doc = json::parse(res->body);
  EXPECT_EQ(doc["root"], "severity");
  EXPECT_EQ(doc["groups"].size(), H().groups().size());
}

TEST_F(ServerTest, SessionFlow) {
  auto id = create("alice");
  auto got = client->Get("/sessions/" + id);
  ASSERT_EQ(got->status, 200);
  EXPECT_EQ(json::parse(got->body)["status"], "open");

  auto js = judgments(power_weights(6));
  answer(id, js);
  auto cr = client->Get("/sessions/" + id + "/consistency");
  ASSERT_EQ(cr->status, 200);
  auto doc = json::parse(cr->body);
  EXPECT_EQ(doc["status"], "consistent");
  for (const auto& [g, v] : doc["cr"].items()) EXPECT_NEAR(v.get<double>(), 0, 1e-9) << g;

  auto submit = client->Post("/sessions/" + id + "/submit", "", "application/json");
  ASSERT_EQ(submit->status, 200);
  EXPECT_EQ(json::parse(submit->body)["status"], "submitted");
}

TEST_F(ServerTest, JudgmentResponseCarriesLiveConsistency) {
  auto id = create("carol");
  auto res = client->Put("/sessions/" + id + "/judgments",
                         R"({"group":"severity","item_a":"attacker_model","item_b":"attack_impact",
                             "preferred":"a","intensity":3})",
                         "application/json");
  ASSERT_EQ(res->status, 200);
  auto doc = json::parse(res->body);
  EXPECT_EQ(doc["group"], "severity");
  EXPECT_TRUE(doc["consistent"].get<bool>());
  EXPECT_GT(doc["weights"]["attacker_model"].get<double>(), doc["weights"]["attack_impact"].get<double>());
}

TEST_F(ServerTest, ErrorStatuses) {
  EXPECT_EQ(client->Get("/sessions/nope")->status, 404);
  EXPECT_EQ(client->Get("/sessions/nope/consistency")->status, 404);
  EXPECT_EQ(client->Put("/sessions/nope/judgments", "{}", "application/json")->status, 404);
  EXPECT_EQ(client->Post("/sessions", "{}", "application/json")->status, 422);
  EXPECT_EQ(client->Post("/sessions", "not json", "application/json")->status, 422);

  auto id = create("dave");
  auto bad = client->Put("/sessions/" + id + "/judgments",
                         R"({"group":"severity","item_a":"attacker_model","item_b":"attack_impact","ratio":2.5})",
                         "application/json");
  EXPECT_EQ(bad->status, 422);
  EXPECT_TRUE(json::parse(bad->body).contains("error"));

  auto early = client->Post("/sessions/" + id + "/submit", "", "application/json");
  ASSERT_EQ(early->status, 409);
  EXPECT_FALSE(json::parse(early->body)["unanswered"].empty());
}

TEST_F(ServerTest, InconsistentSubmitListsGroups) {
  auto id = create("erin");
  answer(id, judgments(power_weights(7)));
  answer(id, {{"severity", "attacker_model", "attack_impact", 9},
              {"severity", "attack_impact", "attack_complexity", 9},
              {"severity", "attack_complexity", "attacker_model", 9}});
  auto res = client->Post("/sessions/" + id + "/submit", "", "application/json");
  ASSERT_EQ(res->status, 409);
  auto groups = json::parse(res->body)["groups"];
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0]["group"], "severity");
  EXPECT_GE(groups[0]["cr"].get<double>(), ahp::kConsistencyThreshold);
}

TEST_F(ServerTest, IdenticalSessionsAgreeFully) {
  auto js = judgments(power_weights(8));
  std::vector<std::string> ids;
  for (const char* name : {"f", "g", "h"}) {
    ids.push_back(create(name));
    answer(ids.back(), js);
    ASSERT_EQ(client->Post("/sessions/" + ids.back() + "/submit", "", "application/json")->status, 200);
  }
  auto res = client->Post("/aggregate", json{{"sessions", ids}}.dump(), "application/json");
  ASSERT_EQ(res->status, 200) << res->body;
  auto doc = json::parse(res->body);
  EXPECT_NEAR(doc["kendalls_w"].get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(doc["strong_agreement"].get<bool>());
  EXPECT_TRUE(doc["warnings"].empty());
}

TEST_F(ServerTest, AggregateMatchesLibraryAndCsvPaths) {
  std::vector<std::string> ids;
  for (unsigned seed : {10u, 11u, 12u}) {
    ids.push_back(create("x" + std::to_string(seed)));
    answer(ids.back(), judgments(power_weights(seed)));
    client->Post("/sessions/" + ids.back() + "/submit", "", "application/json");
  }
  auto res = client->Post("/aggregate", json{{"sessions", ids}}.dump(), "application/json");
  ASSERT_EQ(res->status, 200);
  auto http_model = json::parse(res->body)["weight_model"];

  std::vector<ahp::ExpertResponse> responses;
  for (const auto& id : ids) responses.push_back(store.get(id)->response());
  auto direct = ahp::aggregate_experts(responses, H());
  auto via_csv = ahp::aggregate_experts(ahp::parse_responses_csv(ahp::responses_to_csv(responses), H()), H());
  for (const auto& leaf : H().leaves()) {
    double w = direct.model.global_weight(leaf);
    EXPECT_NEAR(http_model["global"][leaf].get<double>(), w, 1e-9) << leaf;
    EXPECT_NEAR(via_csv.model.global().at(leaf), w, 1e-9) << leaf;
  }
  EXPECT_NEAR(json::parse(res->body)["kendalls_w"].get<double>(), direct.overall.w, 1e-12);
}

TEST_F(ServerTest, AggregateErrors) {
  auto id = create("open");
  EXPECT_EQ(client->Post("/aggregate", json{{"sessions", {id}}}.dump(), "application/json")->status, 409);
  EXPECT_EQ(client->Post("/aggregate", json{{"sessions", {"nope"}}}.dump(), "application/json")->status, 404);
  EXPECT_EQ(client->Post("/aggregate", "{}", "application/json")->status, 422);
}
