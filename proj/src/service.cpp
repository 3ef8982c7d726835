#include "mlrisk/service.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "httplib.h"
#include "json_util.hpp"
#include "mlrisk/io.hpp"

namespace mlrisk::service {

using detail::json;

std::string_view to_string(Status status) {
  switch (status) {
    case Status::Open: return "open";
    case Status::Consistent: return "consistent";
    case Status::Submitted: return "submitted";
  }
  return "open";
}

Judgment judgment_from_json(std::string_view text) {
  const std::string what = "judgment";
  json doc = detail::parse_json(text, what);
  detail::check_schema(doc, what);
  Judgment j;
  j.group = detail::field<std::string>(doc, "group", what);
  j.item_a = detail::field<std::string>(doc, "item_a", what);
  j.item_b = detail::field<std::string>(doc, "item_b", what);
  if (doc.contains("ratio")) {
    const auto& r = doc["ratio"];
    if (r.is_number()) j.ratio = r.get<double>();
    else if (r.is_string()) j.ratio = ahp::parse_ratio(r.get<std::string>());
    else throw ValidationError(what + ": 'ratio' must be a number or a fraction string");
  } else {
    auto preferred = detail::field<std::string>(doc, "preferred", what);
    ahp::Preference p;
    if (preferred == "a") p = ahp::Preference::A;
    else if (preferred == "b") p = ahp::Preference::B;
    else if (preferred == "equal") p = ahp::Preference::Equal;
    else throw ValidationError(what + ": 'preferred' must be \"a\", \"b\" or \"equal\"");
    int intensity = p == ahp::Preference::Equal ? doc.value("intensity", 1) : detail::field<int>(doc, "intensity", what);
    j.ratio = ahp::likert_ratio(p, intensity);
  }
  return j;
}

Session::Session(std::string id, std::string expert, const ahp::Hierarchy& hierarchy)
    : id_(std::move(id)), expert_(std::move(expert)), hierarchy_(&hierarchy) {
  for (const auto& g : hierarchy.groups()) matrices_.emplace(g.path, ahp::PairwiseMatrix(g.item_ids()));
}

Status Session::status() const {
  if (submitted_) return Status::Submitted;
  if (!unanswered().empty()) return Status::Open;
  for (const auto& [group, cr] : consistency_map())
    if (cr >= ahp::kConsistencyThreshold) return Status::Open;
  return Status::Consistent;
}

void Session::apply(const Judgment& j) {
  auto it = matrices_.find(j.group);
  if (it == matrices_.end()) throw ValidationError("unknown group '" + j.group + "'");
  auto& m = it->second;
  if (!m.index_of(j.item_a)) throw ValidationError("'" + j.item_a + "' is not an item of '" + j.group + "'");
  if (!m.index_of(j.item_b)) throw ValidationError("'" + j.item_b + "' is not an item of '" + j.group + "'");
  if (j.item_a == j.item_b) throw ValidationError("an item cannot be compared with itself");
  if (!ahp::on_scale(j.ratio)) throw ValidationError("ratio is not on the nine-level scale");
  m.set(j.item_a, j.item_b, j.ratio);
  answered_[j.group].insert(std::minmax(j.item_a, j.item_b));
}

double Session::consistency(const std::string& group) const {
  return ahp::consistency_ratio(matrices_.at(group));
}

std::map<std::string, double> Session::consistency_map() const {
  std::map<std::string, double> out;
  for (const auto& [group, m] : matrices_) out[group] = ahp::consistency_ratio(m);
  return out;
}

std::size_t Session::answered(const std::string& group) const {
  auto it = answered_.find(group);
  return it == answered_.end() ? 0 : it->second.size();
}

std::vector<std::string> Session::unanswered() const {
  std::vector<std::string> out;
  for (const auto& [group, m] : matrices_)
    if (answered(group) < m.size() * (m.size() - 1) / 2) out.push_back(group);
  return out;
}

ahp::ExpertResponse Session::response() const { return {expert_, matrices_}; }

std::string Session::to_json() const {
  json groups = json::object();
  for (const auto& [group, m] : matrices_) {
    auto w = ahp::derive_weights(m);
    json weights = json::object();
    for (std::size_t i = 0; i < m.size(); ++i) weights[m.labels()[i]] = w[i];
    groups[group] = {{"matrix", m.rows()},
                     {"items", m.labels()},
                     {"weights", weights},
                     {"cr", ahp::consistency_ratio(m)},
                     {"answered", answered(group)},
                     {"pairs", m.size() * (m.size() - 1) / 2}};
  }
  return json{{"schema_version", detail::kSchemaVersion},
              {"id", id_},
              {"expert", expert_},
              {"status", std::string(to_string(status()))},
              {"groups", groups}}
      .dump();
}

SessionStore::SessionStore(const ahp::Hierarchy& hierarchy, std::optional<std::filesystem::path> directory)
    : hierarchy_(&hierarchy), directory_(std::move(directory)) {
  if (!directory_) return;
  std::error_code ec;
  std::filesystem::create_directories(*directory_, ec);
  if (ec) throw IoError("cannot create session directory " + directory_->string() + ": " + ec.message());
  for (const auto& e : std::filesystem::directory_iterator(*directory_))
    if (e.path().extension() == ".jsonl") replay(e.path());
}

void SessionStore::replay(const std::filesystem::path& log) {
  std::istringstream in(read_file(log.string()));
  std::string line;
  std::shared_ptr<Session> session;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string what = log.string() + ":" + std::to_string(lineno);
    json ev = detail::parse_json(line, what);
    auto kind = detail::field<std::string>(ev, "event", what);
    if (kind == "created") {
      session = std::make_shared<Session>(detail::field<std::string>(ev, "session", what),
                                          detail::field<std::string>(ev, "expert", what), *hierarchy_);
    } else if (!session) {
      throw ValidationError(what + ": event before session creation");
    } else if (kind == "judgment") {
      session->apply(judgment_from_json(line));
    } else if (kind == "submitted") {
      session->mark_submitted();
    } else {
      throw ValidationError(what + ": unknown event '" + kind + "'");
    }
  }
  if (!session) return;
  auto e = std::make_shared<Entry>();
  e->snapshot = session;
  sessions_[session->id()] = e;
}

void SessionStore::append(const std::string& id, const std::string& line) const {
  if (!directory_) return;
  std::ofstream out(*directory_ / (id + ".jsonl"), std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) throw IoError("cannot append to the log of session " + id);
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

std::shared_ptr<const Session> SessionStore::create(const std::string& expert) {
  if (expert.empty()) throw ValidationError("expert id must not be empty");
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  auto e = std::make_shared<Entry>();
  std::string id;
  {
    std::unique_lock lock(map_mutex_);
    do {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
      id = buf;
    } while (sessions_.contains(id));
    std::lock_guard write(e->write);
    e->snapshot = std::make_shared<const Session>(id, expert, *hierarchy_);
    sessions_[id] = e;
    append(id, json{{"event", "created"}, {"session", id}, {"expert", expert}}.dump());
  }
  return std::atomic_load(&e->snapshot);
}

std::shared_ptr<const Session> SessionStore::get(const std::string& id) const {
  auto e = entry(id);
  return std::atomic_load(&e->snapshot);
}

std::shared_ptr<const Session> SessionStore::apply(const std::string& id, const Judgment& judgment) {
  auto e = entry(id);
  std::lock_guard write(e->write);
  auto current = std::atomic_load(&e->snapshot);
  if (current->submitted()) throw ConflictError("session '" + id + "' is already submitted");
  auto next = std::make_shared<Session>(*current);
  next->apply(judgment);
  append(id, json{{"event", "judgment"},
                  {"group", judgment.group},
                  {"item_a", judgment.item_a},
                  {"item_b", judgment.item_b},
                  {"ratio", judgment.ratio}}
                 .dump());
  std::shared_ptr<const Session> snapshot = next;
  std::atomic_store(&e->snapshot, snapshot);
  return snapshot;
}

std::shared_ptr<const Session> SessionStore::submit(const std::string& id) {
  auto e = entry(id);
  std::lock_guard write(e->write);
  auto current = std::atomic_load(&e->snapshot);
  if (current->submitted()) throw ConflictError("session '" + id + "' is already submitted");
  std::map<std::string, double> bad;
  for (const auto& [group, cr] : current->consistency_map())
    if (cr >= ahp::kConsistencyThreshold) bad[group] = cr;
  auto unanswered = current->unanswered();
  if (!bad.empty() || !unanswered.empty()) {
    std::string msg = bad.empty() ? "some groups are unanswered" : "some groups are inconsistent (CR >= 0.1)";
    throw ConflictError(msg, std::move(bad), std::move(unanswered));
  }
  auto next = std::make_shared<Session>(*current);
  next->mark_submitted();
  append(id, json{{"event", "submitted"}}.dump());
  std::shared_ptr<const Session> snapshot = next;
  std::atomic_store(&e->snapshot, snapshot);
  return snapshot;
}

ahp::Aggregation SessionStore::aggregate(const std::vector<std::string>& ids,
                                         const ahp::AggregateOptions& options) const {
  if (ids.empty()) throw ValidationError("no sessions to aggregate");
  std::vector<ahp::ExpertResponse> responses;
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("session '" + id + "' listed twice");
    auto s = get(id);
    if (!s->submitted()) throw ConflictError("session '" + id + "' has not been submitted");
    auto r = s->response();
    r.expert = s->expert() + "#" + s->id();
    responses.push_back(std::move(r));
  }
  return ahp::aggregate_experts(responses, *hierarchy_, options);
}

std::vector<std::string> SessionStore::ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, e] : sessions_) out.push_back(id);
  return out;
}

namespace {

void send_json(httplib::Response& res, int status, json body) {
  body["schema_version"] = detail::kSchemaVersion;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  send_json(res, status, std::move(extra));
}

json weights_json(const ahp::PairwiseMatrix& m) {
  auto w = ahp::derive_weights(m);
  json out = json::object();
  for (std::size_t i = 0; i < m.size(); ++i) out[m.labels()[i]] = w[i];
  return out;
}

json aggregation_json(const ahp::Aggregation& agg, const ahp::Hierarchy& h) {
  json groups = json::object();
  for (const auto& [g, c] : agg.group_agreement) groups[g] = {{"w", c.w}, {"strong", c.strong}};
  return {{"weight_model", json::parse(agg.model.to_json(h))},
          {"kendalls_w", agg.overall.w},
          {"strong_agreement", agg.overall.strong},
          {"group_agreement", groups},
          {"warnings", agg.warnings}};
}

// Maps library exceptions to status codes.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    json groups = json::array();
    for (const auto& [g, cr] : e.groups()) groups.push_back({{"group", g}, {"cr", cr}});
    send_error(res, 409, e.what(), {{"groups", groups}, {"unanswered", e.unanswered()}});
  } catch (const Error& e) {
    send_error(res, 422, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, std::string("internal error: ") + e.what());
  }
}

}  // namespace

struct Server::Impl {
  SessionStore& store;
  httplib::Server http;
  std::thread worker;

  explicit Impl(SessionStore& s) : store(s) {
    http.Get("/hierarchy", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { res.set_content(store.hierarchy().to_json(), "application/json"); });
    });

    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json doc = detail::parse_json(req.body.empty() ? "{}" : req.body, "session request");
        detail::check_schema(doc, "session request");
        auto s = store.create(detail::field<std::string>(doc, "expert", "session request"));
        send_json(res, 201, {{"id", s->id()}, {"session", json::parse(s->to_json())}});
      });
    });

    http.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        res.set_content(store.get(req.matches[1])->to_json(), "application/json");
      });
    });

    http.Put(R"(/sessions/([^/]+)/judgments)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::string id = req.matches[1];
        store.get(id);  // 404 before 422
        Judgment j = judgment_from_json(req.body);
        auto s = store.apply(id, j);
        const auto& m = s->matrices().at(j.group);
        double cr = ahp::consistency_ratio(m);
        send_json(res, 200,
                  {{"session", id},
                   {"group", j.group},
                   {"weights", weights_json(m)},
                   {"cr", cr},
                   {"consistent", cr < ahp::kConsistencyThreshold},
                   {"status", std::string(to_string(s->status()))}});
      });
    });

    http.Get(R"(/sessions/([^/]+)/consistency)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = store.get(req.matches[1]);
        json cr = json::object();
        json groups = json::object();
        for (const auto& [g, v] : s->consistency_map()) {
          cr[g] = v;
          groups[g] = {{"cr", v},
                       {"consistent", v < ahp::kConsistencyThreshold},
                       {"answered", s->answered(g)},
                       {"pairs", s->matrices().at(g).size() * (s->matrices().at(g).size() - 1) / 2}};
        }
        send_json(res, 200,
                  {{"session", s->id()}, {"status", std::string(to_string(s->status()))}, {"cr", cr},
                   {"groups", groups}});
      });
    });

    http.Post(R"(/sessions/([^/]+)/submit)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = store.submit(req.matches[1]);
        json weights = json::object();
        for (const auto& [g, m] : s->matrices()) weights[g] = weights_json(m);
        send_json(res, 200, {{"session", s->id()}, {"status", "submitted"}, {"weights", weights}});
      });
    });

    http.Post("/aggregate", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json doc = detail::parse_json(req.body, "aggregate request");
        detail::check_schema(doc, "aggregate request");
        auto ids = detail::field<std::vector<std::string>>(doc, "sessions", "aggregate request");
        ahp::AggregateOptions opts;
        if (doc.value("method", "eigenvector") == "geometric_mean") opts.method = ahp::WeightMethod::GeometricMean;
        send_json(res, 200, aggregation_json(store.aggregate(ids, opts), store.hierarchy()));
      });
    });
  }
};

Server::Server(SessionStore& store) : impl_(std::make_unique<Impl>(store)) {}

Server::~Server() { stop(); }

bool Server::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int Server::start_background(const std::string& host) {
  int port = impl_->http.bind_to_any_port(host);
  if (port < 0) throw IoError("cannot bind a port on " + host);
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::stop() {
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace mlrisk::service
