#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mlrisk/ahp.hpp"
#include "mlrisk/metrics.hpp"

namespace mlrisk::cmlvss {

// Requirement level. Access attributes spell the middle level "limited",
// knowledge attributes "partial".
enum class Level { None, Limited, Full };

double level_factor(Level level);  // 0, 0.5, 1
Level level_from_string(std::string_view text);
std::string_view access_level_name(Level level);
std::string_view knowledge_level_name(Level level);

inline constexpr std::size_t kAccessCount = 11;     // AC1..AC11
inline constexpr std::size_t kKnowledgeCount = 8;   // AK1..AK8

struct AttackProfile {
  std::string id;
  std::string name;
  std::string family;  // evasion, poisoning, ...
  std::vector<std::string> threats;
  std::vector<std::string> assets;
  std::array<Level, kAccessCount> access{};
  std::array<Level, kKnowledgeCount> knowledge{};
  ImpactSet impacts;
  std::optional<Rating> performance;

  // Level of "AC<n>" / "AK<n>"; ValidationError for other ids.
  Level requirement(std::string_view attribute) const;
  void set_requirement(std::string_view attribute, Level level);
};

// All attribute ids in order: AC1..AC11, AK1..AK8.
const std::vector<std::string>& attribute_ids();

// Implied requirements: perfect knowledge at a level implies every
// knowledge attribute at that level; pipeline access implies the access it
// grants downstream (AC2-AC7, AC9, AC10); full training-data knowledge
// implies full surrogate-data access. Idempotent and monotone.
AttackProfile closure(const AttackProfile& profile);

// Profile JSON: {id, name?, family?, threats?, assets?, access: {AC: level},
// knowledge: {AK: level}, impacts: [...], performance?}. Unlisted attributes
// are "none".
AttackProfile profile_from_json(std::string_view text);
std::string profile_to_json(const AttackProfile& profile);

class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<AttackProfile> profiles);
  static Catalog from_json(std::string_view text);
  static const Catalog& builtin();

  const std::vector<AttackProfile>& profiles() const { return profiles_; }
  // NotFoundError for unknown ids.
  const AttackProfile& lookup(std::string_view id) const;
  const AttackProfile* find(std::string_view id) const;

 private:
  std::vector<AttackProfile> profiles_;
};

const AttackProfile& catalog_lookup(std::string_view id);

struct EnvironmentProfile {
  bool data_validation = false;
  bool feature_extraction = false;
  bool ab_testing = false;

  bool naive() const { return !data_validation && !feature_extraction && !ab_testing; }
};

struct SeverityScore {
  double value = 0;  // 10 * clamp(sum of contributions, 0, 1)
  // Weighted contributions; they sum to the pre-scaling combination.
  double attacker_model = 0;  // w_model * (1 - capability cost)
  double impact = 0;          // w_impact * f_impact
  double complexity = 0;      // w_complexity * (1 - environment cost)
  double performance = 0;     // w_perf * f_perf
  // Unweighted terms, for reporting.
  double capability_cost = 0;
  double environment_cost = 0;
  double impact_mass = 0;
  double performance_factor = 0;
};

// Level-1 node ids of the severity hierarchy.
inline constexpr std::string_view kAttackerModel = "attacker_model";
inline constexpr std::string_view kAttackImpact = "attack_impact";
inline constexpr std::string_view kAttackComplexity = "attack_complexity";
inline constexpr std::string_view kAttackPerformance = "attack_performance";

// Throws ValidationError when the hierarchy has an attacker-model leaf that
// is not a profile attribute (the profile cannot be scored completely).
SeverityScore severity(const AttackProfile& profile, const ahp::WeightModel& weights = ahp::WeightModel::defaults(),
                       const EnvironmentProfile& env = {}, const ahp::Hierarchy& hierarchy = ahp::Hierarchy::builtin());

std::string severity_to_json(const AttackProfile& profile, const SeverityScore& score);

// Low 1/3, Medium 2/3, High 1; no class 0.
double performance_factor(std::optional<Rating> performance);

// 0.33 per impact, capped at 1.
double impact_value(const ImpactSet& impacts);
// Normalized AG weight mass of the impacts under `weights`.
double impact_value(const ImpactSet& impacts, const ahp::WeightModel& weights,
                    const ahp::Hierarchy& hierarchy = ahp::Hierarchy::builtin());

// Exploitation likelihood from attack performance: Low 0.35, Medium 0.61, High 0.71.
double performance_likelihood(Rating performance);

}  // namespace mlrisk::cmlvss
