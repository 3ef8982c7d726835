#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mlrisk/ahp.hpp"

namespace mlrisk::service {

enum class Status { Open, Consistent, Submitted };
std::string_view to_string(Status status);

struct Judgment {
  std::string group;
  std::string item_a;
  std::string item_b;
  double ratio = 1;  // importance of item_a over item_b
};

// Accepts {group, item_a, item_b, ratio} or {group, item_a, item_b,
// preferred: "a"|"b"|"equal", intensity}. ValidationError when malformed.
Judgment judgment_from_json(std::string_view text);

class Session {
 public:
  Session(std::string id, std::string expert, const ahp::Hierarchy& hierarchy);

  const std::string& id() const { return id_; }
  const std::string& expert() const { return expert_; }
  bool submitted() const { return submitted_; }
  Status status() const;

  // ValidationError for unknown groups/items or off-scale ratios.
  void apply(const Judgment& judgment);
  void mark_submitted() { submitted_ = true; }

  const std::map<std::string, ahp::PairwiseMatrix>& matrices() const { return matrices_; }
  double consistency(const std::string& group) const;
  std::map<std::string, double> consistency_map() const;
  // Groups with at least one pair still unanswered.
  std::vector<std::string> unanswered() const;
  std::size_t answered(const std::string& group) const;

  ahp::ExpertResponse response() const;
  std::string to_json() const;

 private:
  std::string id_;
  std::string expert_;
  const ahp::Hierarchy* hierarchy_;
  std::map<std::string, ahp::PairwiseMatrix> matrices_;
  std::map<std::string, std::set<std::pair<std::string, std::string>>> answered_;
  bool submitted_ = false;
};

// Raised by SessionStore operations that conflict with the session state.
class ConflictError : public Error {
 public:
  ConflictError(std::string message, std::map<std::string, double> groups = {},
                std::vector<std::string> unanswered = {})
      : Error(std::move(message)), groups_(std::move(groups)), unanswered_(std::move(unanswered)) {}
  const std::map<std::string, double>& groups() const { return groups_; }
  const std::vector<std::string>& unanswered() const { return unanswered_; }

 private:
  std::map<std::string, double> groups_;
  std::vector<std::string> unanswered_;
};

// Concurrent session registry. Each session has one writer at a time;
// readers take an immutable snapshot without locking the session. With a
// directory, every change is appended to <dir>/<id>.jsonl and sessions are
// replayed from those logs on construction.
class SessionStore {
 public:
  explicit SessionStore(const ahp::Hierarchy& hierarchy = ahp::Hierarchy::builtin(),
                        std::optional<std::filesystem::path> directory = std::nullopt);

  const ahp::Hierarchy& hierarchy() const { return *hierarchy_; }

  std::shared_ptr<const Session> create(const std::string& expert);
  // NotFoundError for unknown ids.
  std::shared_ptr<const Session> get(const std::string& id) const;
  std::shared_ptr<const Session> apply(const std::string& id, const Judgment& judgment);
  // ConflictError when a group is unanswered or has CR >= 0.1, or when the
  // session was already submitted.
  std::shared_ptr<const Session> submit(const std::string& id);
  // Every session must be submitted.
  ahp::Aggregation aggregate(const std::vector<std::string>& ids,
                             const ahp::AggregateOptions& options = {}) const;

  std::vector<std::string> ids() const;

 private:
  struct Entry {
    std::mutex write;
    std::shared_ptr<const Session> snapshot;
  };

  std::shared_ptr<Entry> entry(const std::string& id) const;
  void append(const std::string& id, const std::string& line) const;
  void replay(const std::filesystem::path& log);

  const ahp::Hierarchy* hierarchy_;
  std::optional<std::filesystem::path> directory_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

class Server {
 public:
  explicit Server(SessionStore& store);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Blocks until stop(). Returns false if the port cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and serves on a background thread.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mlrisk::service
