#include "mlrisk/cmlvss.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json_util.hpp"
#include "mlrisk/resources.hpp"

namespace mlrisk::cmlvss {

using detail::json;

namespace {

// (is_access, 0-based index) of an attribute id.
std::optional<std::pair<bool, std::size_t>> parse_attribute(std::string_view id) {
  bool access;
  if (id.starts_with("AC")) access = true;
  else if (id.starts_with("AK")) access = false;
  else return std::nullopt;
  std::string_view digits = id.substr(2);
  if (digits.empty() || digits.size() > 2 || digits.front() == '0') return std::nullopt;
  std::size_t n = 0;
  for (char c : digits) {
    if (std::isdigit(static_cast<unsigned char>(c)) == 0) return std::nullopt;
    n = n * 10 + static_cast<std::size_t>(c - '0');
  }
  std::size_t limit = access ? kAccessCount : kKnowledgeCount;
  if (n < 1 || n > limit) return std::nullopt;
  return std::make_pair(access, n - 1);
}

std::string_view impact_attribute(Impact impact) {
  switch (impact) {
    case Impact::Tampering: return "AG1";
    case Impact::Dos: return "AG2";
    case Impact::Disclosure: return "AG3";
  }
  return "AG1";
}

void raise(Level& slot, Level to) { slot = std::max(slot, to); }

std::string node_path(const ahp::Hierarchy& h, std::string_view id) {
  auto p = h.find_node(id);
  if (!p) throw ValidationError("severity hierarchy has no node '" + std::string(id) + "'");
  return *p;
}

}  // namespace

double level_factor(Level level) {
  switch (level) {
    case Level::None: return 0.0;
    case Level::Limited: return 0.5;
    case Level::Full: return 1.0;
  }
  return 0.0;
}

Level level_from_string(std::string_view text) {
  if (text == "none") return Level::None;
  if (text == "limited" || text == "partial") return Level::Limited;
  if (text == "full") return Level::Full;
  throw ValidationError("unknown requirement level '" + std::string(text) + "'");
}

std::string_view access_level_name(Level level) {
  switch (level) {
    case Level::None: return "none";
    case Level::Limited: return "limited";
    case Level::Full: return "full";
  }
  return "none";
}

std::string_view knowledge_level_name(Level level) {
  return level == Level::Limited ? "partial" : access_level_name(level);
}

Level AttackProfile::requirement(std::string_view attribute) const {
  auto a = parse_attribute(attribute);
  if (!a) throw ValidationError("unknown capability attribute '" + std::string(attribute) + "'");
  return a->first ? access[a->second] : knowledge[a->second];
}

void AttackProfile::set_requirement(std::string_view attribute, Level level) {
  auto a = parse_attribute(attribute);
  if (!a) throw ValidationError("unknown capability attribute '" + std::string(attribute) + "'");
  (a->first ? access[a->second] : knowledge[a->second]) = level;
}

const std::vector<std::string>& attribute_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= kAccessCount; ++i) out.push_back("AC" + std::to_string(i));
    for (std::size_t i = 1; i <= kKnowledgeCount; ++i) out.push_back("AK" + std::to_string(i));
    return out;
  }();
  return ids;
}

AttackProfile closure(const AttackProfile& profile) {
  AttackProfile out = profile;
  Level perfect = out.knowledge[0];
  for (auto& k : out.knowledge) raise(k, perfect);
  Level pipeline = out.access[0];
  for (std::size_t i : {1, 2, 3, 4, 5, 6, 8, 9}) raise(out.access[i], pipeline);
  if (out.knowledge[4] == Level::Full) raise(out.access[7], Level::Full);
  return out;
}

namespace {

AttackProfile profile_from(const json& e, const std::string& what) {
  AttackProfile p;
  p.id = detail::field<std::string>(e, "id", what);
  const std::string ctx = what + " '" + p.id + "'";
  p.name = e.value("name", "");
  p.family = e.value("family", "");
  p.threats = e.value("threats", std::vector<std::string>{});
  p.assets = e.value("assets", std::vector<std::string>{});
  for (const char* key : {"access", "knowledge"}) {
    if (!e.contains(key)) continue;
    bool want_access = std::string_view(key) == "access";
    const json levels = e[key];
    if (!levels.is_object()) throw ValidationError(ctx + ": '" + key + "' must be an object");
    for (const auto& [attr, level] : levels.items()) {
      auto a = parse_attribute(attr);
      if (!a || a->first != want_access)
        throw ValidationError(ctx + ": '" + attr + "' is not a " + key + " attribute");
      if (!level.is_string()) throw ValidationError(ctx + ": level of '" + attr + "' must be a string");
      auto text = level.get<std::string>();
      if (want_access && text == "partial") throw ValidationError(ctx + ": access levels are none/limited/full");
      if (!want_access && text == "limited") throw ValidationError(ctx + ": knowledge levels are none/partial/full");
      p.set_requirement(attr, level_from_string(text));
    }
  }
  for (const auto& i : e.value("impacts", std::vector<std::string>{})) p.impacts.insert(impact_from_string(i));
  if (e.contains("performance") && !e["performance"].is_null())
    p.performance = rating_from_string(e["performance"].get<std::string>());
  return p;
}

json profile_json(const AttackProfile& p) {
  json access = json::object();
  json knowledge = json::object();
  for (std::size_t i = 0; i < kAccessCount; ++i)
    if (p.access[i] != Level::None) access["AC" + std::to_string(i + 1)] = access_level_name(p.access[i]);
  for (std::size_t i = 0; i < kKnowledgeCount; ++i)
    if (p.knowledge[i] != Level::None)
      knowledge["AK" + std::to_string(i + 1)] = knowledge_level_name(p.knowledge[i]);
  json impacts = json::array();
  for (auto i : p.impacts) impacts.push_back(std::string(to_string(i)));
  json out = {{"id", p.id},         {"name", p.name},           {"family", p.family},
              {"threats", p.threats}, {"assets", p.assets},     {"access", access},
              {"knowledge", knowledge}, {"impacts", impacts}};
  out["performance"] = p.performance ? json(std::string(to_string(*p.performance))) : json(nullptr);
  return out;
}

}  // namespace

AttackProfile profile_from_json(std::string_view text) {
  const std::string what = "attack profile";
  json doc = detail::parse_json(text, what);
  detail::check_schema(doc, what);
  return profile_from(doc, what);
}

std::string profile_to_json(const AttackProfile& profile) {
  json out = profile_json(profile);
  out["schema_version"] = detail::kSchemaVersion;
  return out.dump(2);
}

Catalog::Catalog(std::vector<AttackProfile> profiles) : profiles_(std::move(profiles)) {
  std::set<std::string> ids;
  for (const auto& p : profiles_) {
    if (!ids.insert(p.id).second) throw ValidationError("technique '" + p.id + "' listed twice in the catalog");
    if (p.impacts.empty()) throw ValidationError("technique '" + p.id + "' has no impact");
    if (p.family == "evasion") {
      AttackProfile c = closure(p);
      // query, model, pipeline or sensor access
      if (c.access[0] == Level::None && c.access[1] == Level::None && c.access[8] == Level::None &&
          c.access[9] == Level::None && c.access[10] == Level::None)
        throw ValidationError("evasion technique '" + p.id + "' requires no model-facing access");
    }
  }
}

Catalog Catalog::from_json(std::string_view text) {
  const std::string what = "technique catalog";
  json doc = detail::parse_json(text, what);
  detail::check_schema(doc, what);
  std::vector<AttackProfile> profiles;
  const json entries = detail::field<json>(doc, "techniques", what);
  for (const auto& e : entries) profiles.push_back(profile_from(e, what));
  return Catalog(std::move(profiles));
}

const Catalog& Catalog::builtin() {
  static const Catalog catalog = [] {
    auto text = resource("catalog.json");
    if (!text) throw NotFoundError("built-in technique catalog is missing");
    return from_json(*text);
  }();
  return catalog;
}

const AttackProfile* Catalog::find(std::string_view id) const {
  for (const auto& p : profiles_)
    if (p.id == id) return &p;
  return nullptr;
}

const AttackProfile& Catalog::lookup(std::string_view id) const {
  if (const auto* p = find(id)) return *p;
  throw NotFoundError("unknown technique '" + std::string(id) + "'");
}

const AttackProfile& catalog_lookup(std::string_view id) { return Catalog::builtin().lookup(id); }

double performance_factor(std::optional<Rating> performance) {
  if (!performance) return 0.0;
  switch (*performance) {
    case Rating::Low: return 1.0 / 3.0;
    case Rating::Medium: return 2.0 / 3.0;
    case Rating::High: return 1.0;
  }
  return 0.0;
}

double impact_value(const ImpactSet& impacts) {
  return std::min(1.0, 0.33 * static_cast<double>(impacts.size()));
}

double impact_value(const ImpactSet& impacts, const ahp::WeightModel& weights, const ahp::Hierarchy& hierarchy) {
  std::string group = node_path(hierarchy, kAttackImpact);
  double mass = 0;
  for (auto i : impacts) mass += weights.local_weight(group, impact_attribute(i));
  return std::clamp(mass, 0.0, 1.0);
}

double performance_likelihood(Rating performance) {
  switch (performance) {
    case Rating::Low: return 0.35;
    case Rating::Medium: return 0.61;
    case Rating::High: return 0.71;
  }
  return 0.35;
}

SeverityScore severity(const AttackProfile& profile, const ahp::WeightModel& weights, const EnvironmentProfile& env,
                       const ahp::Hierarchy& hierarchy) {
  SeverityScore s;
  const std::string model_path = node_path(hierarchy, kAttackerModel);
  const std::string complexity_path = node_path(hierarchy, kAttackComplexity);
  double w_model = weights.global_weight(model_path);
  double w_impact = weights.global_weight(node_path(hierarchy, kAttackImpact));
  double w_complexity = weights.global_weight(complexity_path);
  double w_perf = weights.global_weight(node_path(hierarchy, kAttackPerformance));

  // Capability cost: weight mass of the closed requirements, normalized by
  // the mass of the whole attacker-model subtree.
  AttackProfile closed = closure(profile);
  double mass = 0;
  double required = 0;
  for (const auto& leaf : hierarchy.leaves_under(model_path)) {
    std::string id = leaf.substr(leaf.rfind('/') + 1);
    if (!parse_attribute(id))
      throw ValidationError("profile '" + profile.id + "' has no requirement level for '" + id + "'");
    double w = weights.global_weight(leaf);
    mass += w;
    required += w * level_factor(closed.requirement(id));
  }
  s.capability_cost = mass > 0 ? required / mass : 0.0;

  // Environment cost: weight mass of the enabled guards among all guards.
  double guard_mass = 0;
  double enabled = 0;
  const std::pair<std::string_view, bool> guards[] = {
      {"data_validation", env.data_validation}, {"feature_extraction", env.feature_extraction},
      {"ab_testing", env.ab_testing}};
  for (const auto& [id, on] : guards) {
    double w = weights.local_weight(complexity_path, id);
    guard_mass += w;
    if (on) enabled += w;
  }
  s.environment_cost = guard_mass > 0 ? enabled / guard_mass : 0.0;

  s.impact_mass = impact_value(profile.impacts, weights, hierarchy);
  s.performance_factor = performance_factor(profile.performance);

  s.attacker_model = w_model * (1.0 - s.capability_cost);
  s.impact = w_impact * s.impact_mass;
  s.complexity = w_complexity * (1.0 - s.environment_cost);
  s.performance = w_perf * s.performance_factor;
  double total = s.attacker_model + s.impact + s.complexity + s.performance;
  s.value = 10.0 * std::clamp(total, 0.0, 1.0);
  return s;
}

std::string severity_to_json(const AttackProfile& profile, const SeverityScore& score) {
  json out = {{"schema_version", detail::kSchemaVersion},
              {"technique", profile.id},
              {"name", profile.name},
              {"severity", score.value},
              {"breakdown",
               {{"attacker_model", score.attacker_model},
                {"impact", score.impact},
                {"complexity", score.complexity},
                {"performance", score.performance}}},
              {"terms",
               {{"capability_cost", score.capability_cost},
                {"environment_cost", score.environment_cost},
                {"impact_mass", score.impact_mass},
                {"performance_factor", score.performance_factor}}}};
  return out.dump(2);
}

}  // namespace mlrisk::cmlvss
