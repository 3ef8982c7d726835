#include "mlrisk/ahp.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "mlrisk/resources.hpp"

namespace mlrisk::ahp {

using detail::json;

namespace {

constexpr double kReciprocalTolerance = 1e-9;

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Average ranks (1-based) for ascending scores; values within 1e-12 tie.
std::vector<double> mid_ranks(const std::vector<double>& scores, double* tie_term) {
  std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && std::abs(scores[order[j]] - scores[order[i]]) <= 1e-12) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    double t = static_cast<double>(j - i);
    *tie_term += t * t * t - t;
    i = j;
  }
  return ranks;
}

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_ratio(double r) {
  for (int k = 2; k <= 9; ++k)
    if (close_rel(r, 1.0 / k, 1e-12)) return "1/" + std::to_string(k);
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, r);
  return std::string(buf, res.ptr);
}

}  // namespace

PairwiseMatrix::PairwiseMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), values_(labels_.size() * labels_.size(), 1.0) {
  std::set<std::string> seen;
  for (const auto& l : labels_)
    if (!seen.insert(l).second) throw ValidationError("duplicate matrix label '" + l + "'");
}

PairwiseMatrix::PairwiseMatrix(std::vector<std::string> labels, std::vector<std::vector<double>> values)
    : PairwiseMatrix(std::move(labels)) {
  std::size_t n = size();
  if (values.size() != n) throw ValidationError("pairwise matrix must have one row per label");
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i].size() != n) throw ValidationError("pairwise matrix must be square");
    for (std::size_t j = 0; j < n; ++j) {
      double v = values[i][j];
      if (!std::isfinite(v) || v <= 0)
        throw ValidationError("pairwise matrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") must be positive");
      values_[i * n + j] = v;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!close_rel(values_[i * n + i], 1.0, kReciprocalTolerance))
      throw ValidationError("pairwise matrix diagonal must be 1");
    for (std::size_t j = i + 1; j < n; ++j)
      if (!close_rel(values_[i * n + j] * values_[j * n + i], 1.0, kReciprocalTolerance))
        throw ValidationError("pairwise matrix is not reciprocal at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
  }
}

PairwiseMatrix PairwiseMatrix::from_weights(std::vector<std::string> labels, const std::vector<double>& weights) {
  if (weights.size() != labels.size()) throw ValidationError("one weight per label required");
  PairwiseMatrix m(std::move(labels));
  for (double w : weights)
    if (!(w > 0)) throw ValidationError("weights must be positive");
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) m.values_[i * m.size() + j] = weights[i] / weights[j];
  return m;
}

std::optional<std::size_t> PairwiseMatrix::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

void PairwiseMatrix::set(std::size_t i, std::size_t j, double ratio) {
  if (i >= size() || j >= size()) throw ValidationError("pairwise matrix index out of range");
  if (!std::isfinite(ratio) || ratio <= 0) throw ValidationError("judgment ratio must be positive");
  if (i == j) {
    if (!close_rel(ratio, 1.0, kReciprocalTolerance))
      throw ValidationError("an item can only be judged equal to itself");
    return;
  }
  values_[i * size() + j] = ratio;
  values_[j * size() + i] = 1.0 / ratio;
}

void PairwiseMatrix::set(std::string_view a, std::string_view b, double ratio) {
  auto i = index_of(a);
  auto j = index_of(b);
  if (!i) throw ValidationError("unknown item '" + std::string(a) + "'");
  if (!j) throw ValidationError("unknown item '" + std::string(b) + "'");
  set(*i, *j, ratio);
}

std::vector<std::vector<double>> PairwiseMatrix::rows() const {
  std::vector<std::vector<double>> out(size(), std::vector<double>(size()));
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = 0; j < size(); ++j) out[i][j] = (*this)(i, j);
  return out;
}

double likert_ratio(Preference preferred, int intensity) {
  if (intensity < 1 || intensity > 9) throw ValidationError("intensity must be between 1 and 9");
  switch (preferred) {
    case Preference::A: return intensity;
    case Preference::B: return 1.0 / intensity;
    case Preference::Equal: return 1.0;
  }
  return 1.0;
}

bool on_scale(double ratio) {
  for (int k = 1; k <= 9; ++k)
    if (close_rel(ratio, k, 1e-12) || close_rel(ratio, 1.0 / k, 1e-12)) return true;
  return false;
}

EigenResult principal_eigen(const PairwiseMatrix& matrix) {
  std::size_t n = matrix.size();
  if (n == 0) throw ValidationError("cannot derive weights from an empty matrix");
  EigenResult out;
  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  std::vector<double> y(n);
  for (std::size_t iter = 1; iter <= kMaxIterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) s += matrix(i, j) * x[j];
      y[i] = s;
    }
    double total = std::accumulate(y.begin(), y.end(), 0.0);
    double delta = 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] /= total;
      delta = std::max(delta, std::abs(y[i] - x[i]));
    }
    x.swap(y);
    if (delta < kTolerance) {
      out.iterations = iter;
      double lambda = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lambda += matrix(i, j) * x[j];
      out.lambda_max = lambda;
      out.weights = std::move(x);
      return out;
    }
  }
  throw ConvergenceError("power iteration did not converge within " + std::to_string(kMaxIterations) +
                         " iterations");
}

std::vector<double> derive_weights(const PairwiseMatrix& matrix, WeightMethod method) {
  if (method == WeightMethod::Eigenvector) return principal_eigen(matrix).weights;
  std::size_t n = matrix.size();
  if (n == 0) throw ValidationError("cannot derive weights from an empty matrix");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double log_sum = 0;
    for (std::size_t j = 0; j < n; ++j) log_sum += std::log(matrix(i, j));
    w[i] = std::exp(log_sum / static_cast<double>(n));
  }
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

double random_index(std::size_t n) {
  static constexpr double kRi[] = {0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49};
  if (n < 1 || n > 10)
    throw ValidationError("consistency index is tabulated for 1 to 10 items, got " + std::to_string(n));
  return kRi[n - 1];
}

double consistency_ratio(const PairwiseMatrix& matrix) {
  std::size_t n = matrix.size();
  double ri = random_index(n);
  if (n <= 2) return 0.0;
  double lambda = principal_eigen(matrix).lambda_max;
  double ci = (lambda - static_cast<double>(n)) / static_cast<double>(n - 1);
  return std::max(0.0, ci / ri);
}

Concordance kendalls_w(const std::vector<std::vector<double>>& rankings) {
  if (rankings.empty()) throw ValidationError("Kendall's W needs at least one rater");
  std::size_t n = rankings.front().size();
  if (n < 2) throw ValidationError("Kendall's W needs at least two items");
  double m = static_cast<double>(rankings.size());
  std::vector<double> totals(n, 0.0);
  double tie_sum = 0;
  for (const auto& r : rankings) {
    if (r.size() != n) throw ValidationError("every rater must rank the same number of items");
    auto ranks = mid_ranks(r, &tie_sum);
    for (std::size_t i = 0; i < n; ++i) totals[i] += ranks[i];
  }
  double nd = static_cast<double>(n);
  double mean = m * (nd + 1) / 2;
  double s = 0;
  for (double t : totals) s += (t - mean) * (t - mean);
  double denom = m * m * (nd * nd * nd - nd) - m * tie_sum;
  Concordance c;
  // Every rater tied every item: they agree completely.
  c.w = denom <= 0 ? 1.0 : std::clamp(12 * s / denom, 0.0, 1.0);
  c.strong = c.w > kStrongAgreement;
  return c;
}

Concordance kendalls_w(const std::vector<std::map<std::string, double>>& rankings) {
  if (rankings.empty()) throw ValidationError("Kendall's W needs at least one rater");
  std::vector<std::vector<double>> rows;
  for (const auto& r : rankings) {
    if (r.size() != rankings.front().size() ||
        !std::equal(r.begin(), r.end(), rankings.front().begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; }))
      throw ValidationError("every rater must rank the same items");
    std::vector<double> row;
    for (const auto& [item, v] : r) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return kendalls_w(rows);
}

std::vector<std::string> SiblingGroup::item_ids() const {
  std::vector<std::string> out;
  for (const auto& i : items) out.push_back(i.id);
  return out;
}

Hierarchy::Hierarchy(std::string root, std::vector<SiblingGroup> groups)
    : root_(std::move(root)), groups_(std::move(groups)) {
  std::set<std::string> paths;
  for (const auto& g : groups_) {
    if (!paths.insert(g.path).second) throw ValidationError("hierarchy group '" + g.path + "' listed twice");
    if (g.items.size() < 2 || g.items.size() > 10)
      throw ValidationError("hierarchy group '" + g.path + "' must have 2 to 10 items");
    std::set<std::string> ids;
    for (const auto& i : g.items) {
      if (i.id.empty() || i.id.find('/') != std::string::npos)
        throw ValidationError("hierarchy group '" + g.path + "' has an invalid item id '" + i.id + "'");
      if (!ids.insert(i.id).second)
        throw ValidationError("hierarchy group '" + g.path + "' repeats item '" + i.id + "'");
    }
  }
  if (!paths.contains(root_)) throw ValidationError("hierarchy root group '" + root_ + "' is missing");
  for (const auto& g : groups_) {
    if (g.path == root_) continue;
    auto slash = g.path.rfind('/');
    if (slash == std::string::npos) throw ValidationError("hierarchy group '" + g.path + "' is not under the root");
    const SiblingGroup* parent = find_group(std::string_view(g.path).substr(0, slash));
    std::string id = g.path.substr(slash + 1);
    if (parent == nullptr ||
        std::none_of(parent->items.begin(), parent->items.end(), [&](const auto& i) { return i.id == id; }))
      throw ValidationError("hierarchy group '" + g.path + "' has no parent item");
  }
}

Hierarchy Hierarchy::from_json(std::string_view text) {
  const std::string what = "hierarchy";
  json doc = detail::parse_json(text, what);
  detail::check_schema(doc, what);
  std::vector<SiblingGroup> groups;
  const json entries = detail::field<json>(doc, "groups", what);
  for (const auto& e : entries) {
    SiblingGroup g;
    g.path = detail::field<std::string>(e, "path", what);
    g.kind = e.value("kind", "");
    g.question = e.value("question", "");
    const json items = detail::field<json>(e, "items", what + " group '" + g.path + "'");
    for (const auto& i : items)
      g.items.push_back({detail::field<std::string>(i, "id", what), i.value("label", "")});
    groups.push_back(std::move(g));
  }
  return Hierarchy(detail::field<std::string>(doc, "root", what), std::move(groups));
}

const Hierarchy& Hierarchy::builtin() {
  static const Hierarchy h = [] {
    auto text = resource("hierarchy.json");
    if (!text) throw NotFoundError("built-in hierarchy is missing");
    return from_json(*text);
  }();
  return h;
}

std::string Hierarchy::to_json() const {
  json groups = json::array();
  for (const auto& g : groups_) {
    json items = json::array();
    for (const auto& i : g.items) items.push_back({{"id", i.id}, {"label", i.label}});
    json pairs = json::array();
    for (const auto& q : questions(g)) pairs.push_back({q.a, q.b});
    groups.push_back({{"path", g.path}, {"kind", g.kind}, {"question", g.question}, {"items", items},
                      {"pairs", pairs}});
  }
  return json{{"schema_version", detail::kSchemaVersion}, {"root", root_}, {"groups", groups}}.dump(2);
}

const SiblingGroup* Hierarchy::find_group(std::string_view path) const {
  for (const auto& g : groups_)
    if (g.path == path) return &g;
  return nullptr;
}

std::vector<std::string> Hierarchy::leaves() const { return leaves_under(root_); }

std::vector<std::string> Hierarchy::leaves_under(std::string_view path) const {
  const SiblingGroup* g = find_group(path);
  if (g == nullptr) return {std::string(path)};
  std::vector<std::string> out;
  for (const auto& i : g->items) {
    auto sub = leaves_under(g->path + "/" + i.id);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> Hierarchy::steps(std::string_view node_path) const {
  std::vector<std::pair<std::string, std::string>> out;
  std::string path(node_path);
  while (path != root_) {
    auto slash = path.rfind('/');
    if (slash == std::string::npos) throw NotFoundError("'" + std::string(node_path) + "' is not in the hierarchy");
    std::string group = path.substr(0, slash);
    std::string id = path.substr(slash + 1);
    const SiblingGroup* g = find_group(group);
    if (g == nullptr ||
        std::none_of(g->items.begin(), g->items.end(), [&](const auto& i) { return i.id == id; }))
      throw NotFoundError("'" + std::string(node_path) + "' is not in the hierarchy");
    out.emplace_back(group, id);
    path = group;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::optional<std::string> Hierarchy::find_node(std::string_view id) const {
  for (const auto& g : groups_)
    for (const auto& i : g.items)
      if (i.id == id) return g.path + "/" + i.id;
  return std::nullopt;
}

std::vector<PairQuestion> Hierarchy::questions(const SiblingGroup& group) const {
  std::vector<PairQuestion> out;
  for (std::size_t i = 0; i < group.items.size(); ++i)
    for (std::size_t j = i + 1; j < group.items.size(); ++j)
      out.push_back({group.path, group.items[i].id, group.items[j].id, group.question});
  return out;
}

WeightModel::WeightModel(const Hierarchy& hierarchy, std::map<std::string, std::map<std::string, double>> local,
                         Provenance provenance)
    : local_(std::move(local)), provenance_(std::move(provenance)) {
  for (const auto& [path, weights] : local_)
    if (hierarchy.find_group(path) == nullptr)
      throw ValidationError("weight model has weights for unknown group '" + path + "'");
  for (const auto& g : hierarchy.groups()) {
    auto it = local_.find(g.path);
    if (it == local_.end()) throw ValidationError("weight model is missing group '" + g.path + "'");
    auto& weights = it->second;
    double total = 0;
    for (const auto& item : g.items) {
      auto w = weights.find(item.id);
      if (w == weights.end())
        throw ValidationError("weight model group '" + g.path + "' is missing item '" + item.id + "'");
      if (!std::isfinite(w->second) || w->second < 0)
        throw ValidationError("weight model group '" + g.path + "' has a negative weight");
      total += w->second;
    }
    if (weights.size() != g.items.size())
      throw ValidationError("weight model group '" + g.path + "' has items outside the hierarchy");
    if (std::abs(total - 1.0) > 1e-6)
      throw ValidationError("weights of group '" + g.path + "' sum to " + std::to_string(total));
    for (auto& [id, w] : weights) w /= total;
  }
  global_[hierarchy.root()] = 1.0;
  // Groups are stored parent-first, so the parent's global weight is known.
  for (const auto& g : hierarchy.groups()) {
    double base = global_.at(g.path);
    for (const auto& item : g.items) global_[g.path + "/" + item.id] = base * local_.at(g.path).at(item.id);
  }
}

WeightModel WeightModel::defaults(const Hierarchy& hierarchy) {
  std::map<std::string, std::map<std::string, double>> local;
  for (const auto& g : hierarchy.groups()) {
    auto& w = local[g.path];
    for (const auto& item : g.items) w[item.id] = 1.0 / static_cast<double>(g.items.size());
  }
  auto& top = local[hierarchy.root()];
  if (top.contains("attacker_model") && top.size() == 4) {
    top["attacker_model"] = 0.5;
    top["attack_impact"] = 0.2;
    top["attack_performance"] = 0.15;
    top["attack_complexity"] = 0.15;
  }
  return WeightModel(hierarchy, std::move(local), Provenance{{}, "", "default"});
}

double WeightModel::local_weight(std::string_view group, std::string_view item) const {
  auto g = local_.find(std::string(group));
  if (g == local_.end()) throw NotFoundError("no weights for group '" + std::string(group) + "'");
  auto w = g->second.find(std::string(item));
  if (w == g->second.end())
    throw NotFoundError("no weight for '" + std::string(item) + "' in group '" + std::string(group) + "'");
  return w->second;
}

double WeightModel::global_weight(std::string_view node_path) const {
  auto it = global_.find(std::string(node_path));
  if (it == global_.end()) throw NotFoundError("no weight for '" + std::string(node_path) + "'");
  return it->second;
}

std::string WeightModel::to_json(const Hierarchy& hierarchy) const {
  json local = json::object();
  for (const auto& [path, weights] : local_) local[path] = weights;
  json global = json::object();
  for (const auto& leaf : hierarchy.leaves()) global[leaf] = global_weight(leaf);
  json prov = {{"experts", provenance_.experts},
               {"aggregated_at", provenance_.aggregated_at},
               {"method", provenance_.method}};
  return json{{"schema_version", detail::kSchemaVersion},
              {"root", hierarchy.root()},
              {"local", local},
              {"global", global},
              {"provenance", prov}}
      .dump(2);
}

WeightModel WeightModel::from_json(std::string_view text, const Hierarchy& hierarchy) {
  const std::string what = "weight model";
  json doc = detail::parse_json(text, what);
  detail::check_schema(doc, what);
  auto local = detail::field<std::map<std::string, std::map<std::string, double>>>(doc, "local", what);
  Provenance prov;
  if (doc.contains("provenance")) {
    const auto& p = doc["provenance"];
    prov.experts = p.value("experts", std::vector<std::string>{});
    prov.aggregated_at = p.value("aggregated_at", "");
    prov.method = p.value("method", "");
  }
  WeightModel model(hierarchy, std::move(local), std::move(prov));
  if (doc.contains("global")) {
    for (const auto& [path, w] : doc["global"].items()) {
      auto it = model.global_.find(path);
      if (it == model.global_.end() || !w.is_number() || std::abs(it->second - w.get<double>()) > 1e-6)
        throw ValidationError(what + ": global weight of '" + path + "' disagrees with the local weights");
    }
  }
  return model;
}

std::vector<std::string> ExpertResponse::missing_groups(const Hierarchy& hierarchy) const {
  std::vector<std::string> out;
  for (const auto& g : hierarchy.groups())
    if (!matrices.contains(g.path)) out.push_back(g.path);
  return out;
}

namespace {

// Weights of `m` reordered to the group's item order.
std::map<std::string, double> group_weights(const PairwiseMatrix& m, const SiblingGroup& g, WeightMethod method,
                                            const std::string& expert) {
  auto ids = g.item_ids();
  std::set<std::string> want(ids.begin(), ids.end());
  auto labels = m.labels();
  std::set<std::string> have(labels.begin(), labels.end());
  if (want != have)
    throw ValidationError("expert '" + expert + "' compared the wrong items in group '" + g.path + "'");
  auto w = derive_weights(m, method);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]] = w[i];
  return out;
}

}  // namespace

Aggregation aggregate_experts(const std::vector<ExpertResponse>& responses, const Hierarchy& hierarchy,
                              const AggregateOptions& options) {
  if (responses.empty()) throw ValidationError("no expert responses to aggregate");
  std::set<std::string> names;
  for (const auto& r : responses) {
    if (!names.insert(r.expert).second) throw ValidationError("expert '" + r.expert + "' responded twice");
    auto missing = r.missing_groups(hierarchy);
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      throw ValidationError("expert '" + r.expert + "' has not answered: " + list);
    }
  }

  std::vector<InconsistentGroup> bad;
  for (const auto& r : responses)
    for (const auto& g : hierarchy.groups()) {
      double cr = consistency_ratio(r.matrices.at(g.path));
      if (cr >= kConsistencyThreshold) bad.push_back({r.expert, g.path, cr});
    }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "inconsistent judgments (CR >= 0.1):";
    for (const auto& b : bad) msg << " " << b.expert << "@" << b.group << "=" << b.cr;
    throw InconsistentResponsesError(msg.str(), std::move(bad));
  }

  Aggregation out;
  std::map<std::string, std::map<std::string, double>> local;
  std::vector<std::map<std::string, std::map<std::string, double>>> per_expert(responses.size());
  for (const auto& g : hierarchy.groups()) {
    std::vector<std::map<std::string, double>> ranks;
    auto& mean = local[g.path];
    for (std::size_t e = 0; e < responses.size(); ++e) {
      auto w = group_weights(responses[e].matrices.at(g.path), g, options.method, responses[e].expert);
      per_expert[e][g.path] = w;
      std::map<std::string, double> r;
      for (const auto& [id, v] : w) {
        mean[id] += v / static_cast<double>(responses.size());
        r[id] = -v;  // heavier weight ranks first
      }
      ranks.push_back(std::move(r));
    }
    double total = 0;
    for (const auto& [id, v] : mean) total += v;
    for (auto& [id, v] : mean) v /= total;
    out.group_agreement[g.path] = kendalls_w(ranks);
  }

  std::vector<std::map<std::string, double>> leaf_ranks;
  for (auto& w : per_expert) {
    WeightModel single(hierarchy, std::move(w));
    std::map<std::string, double> r;
    for (const auto& leaf : hierarchy.leaves()) r[leaf] = -single.global_weight(leaf);
    leaf_ranks.push_back(std::move(r));
  }
  out.overall = kendalls_w(leaf_ranks);

  Provenance prov;
  for (const auto& r : responses) prov.experts.push_back(r.expert);
  prov.aggregated_at = options.timestamp.empty() ? utc_now() : options.timestamp;
  prov.method = options.method == WeightMethod::Eigenvector ? "eigenvector" : "geometric_mean";
  out.model = WeightModel(hierarchy, std::move(local), std::move(prov));

  if (responses.size() > 1) {
    if (!out.overall.strong) {
      std::ostringstream msg;
      msg << "expert agreement is weak (Kendall's W = " << out.overall.w << ")";
      out.warnings.push_back(msg.str());
    }
    for (const auto& [group, c] : out.group_agreement)
      if (!c.strong) {
        std::ostringstream msg;
        msg << "weak agreement in group '" << group << "' (Kendall's W = " << c.w << ")";
        out.warnings.push_back(msg.str());
      }
  }
  return out;
}

double parse_ratio(std::string_view text) {
  std::string t = trim(text);
  auto number = [&](std::string_view part) {
    std::string s = trim(part);
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
      throw ValidationError("malformed ratio '" + t + "'");
    return v;
  };
  double v;
  if (auto slash = t.find('/'); slash != std::string::npos) {
    double den = number(std::string_view(t).substr(slash + 1));
    if (den == 0) throw ValidationError("malformed ratio '" + t + "'");
    v = number(std::string_view(t).substr(0, slash)) / den;
  } else {
    v = number(t);
  }
  if (!std::isfinite(v) || v <= 0) throw ValidationError("ratio '" + t + "' must be positive");
  return v;
}

std::vector<ExpertResponse> parse_responses_csv(std::string_view text, const Hierarchy& hierarchy) {
  std::vector<ExpertResponse> out;
  std::map<std::string, std::size_t> index;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, double> answered;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).starts_with('#')) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    auto fail = [&](const std::string& msg) {
      throw ValidationError("responses CSV line " + std::to_string(lineno) + ": " + msg);
    };
    if (!header) {
      if (cells != std::vector<std::string>{"expert", "group", "item_a", "item_b", "ratio"})
        fail("expected header expert,group,item_a,item_b,ratio");
      header = true;
      continue;
    }
    if (cells.size() != 5) fail("expected 5 fields, found " + std::to_string(cells.size()));
    const auto& [expert, group, a, b, ratio_text] =
        std::tie(cells[0], cells[1], cells[2], cells[3], cells[4]);
    if (expert.empty()) fail("empty expert id");
    const SiblingGroup* g = hierarchy.find_group(group);
    if (g == nullptr) fail("unknown group '" + group + "'");
    if (a == b) fail("an item cannot be compared with itself");
    double ratio = 0;
    try {
      ratio = parse_ratio(ratio_text);
    } catch (const ValidationError& e) {
      fail(e.what());
    }
    auto [pos, added] = index.emplace(expert, out.size());
    if (added) out.push_back({expert, {}});
    auto& matrices = out[pos->second].matrices;
    auto m = matrices.find(group);
    if (m == matrices.end()) m = matrices.emplace(group, PairwiseMatrix(g->item_ids())).first;
    if (!m->second.index_of(a)) fail("'" + a + "' is not an item of group '" + group + "'");
    if (!m->second.index_of(b)) fail("'" + b + "' is not an item of group '" + group + "'");
    auto key = a < b ? std::make_tuple(expert, group, a, b) : std::make_tuple(expert, group, b, a);
    double normalized = a < b ? ratio : 1.0 / ratio;
    if (auto prev = answered.find(key); prev != answered.end()) {
      if (!close_rel(prev->second, normalized, 1e-9)) fail("conflicting answer for " + a + " vs " + b);
      continue;
    }
    answered.emplace(key, normalized);
    m->second.set(a, b, ratio);
  }
  if (!header) throw ValidationError("responses CSV is empty");
  return out;
}

std::string responses_to_csv(const std::vector<ExpertResponse>& responses) {
  std::string out = "expert,group,item_a,item_b,ratio\n";
  for (const auto& r : responses)
    for (const auto& [group, m] : r.matrices)
      for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j)
          out += r.expert + "," + group + "," + m.labels()[i] + "," + m.labels()[j] + "," + format_ratio(m(i, j)) + "\n";
  return out;
}

}  // namespace mlrisk::ahp
