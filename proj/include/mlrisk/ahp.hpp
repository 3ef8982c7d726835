#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mlrisk/error.hpp"

namespace mlrisk::ahp {

// Reciprocal pairwise-comparison matrix. a(i, j) is how much more important
// item i is than item j; a(j, i) == 1 / a(i, j) always holds.
class PairwiseMatrix {
 public:
  PairwiseMatrix() = default;
  // Identity matrix (every pair judged equal).
  explicit PairwiseMatrix(std::vector<std::string> labels);
  // Throws ValidationError unless `values` is square, positive, has a unit
  // diagonal and is reciprocal to within 1e-9 relative error.
  PairwiseMatrix(std::vector<std::string> labels, std::vector<std::vector<double>> values);

  // a(i, j) = w_i / w_j: perfectly consistent.
  static PairwiseMatrix from_weights(std::vector<std::string> labels, const std::vector<double>& weights);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const;

  double operator()(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  // Sets a(i, j) = ratio and a(j, i) = 1 / ratio.
  void set(std::size_t i, std::size_t j, double ratio);
  void set(std::string_view a, std::string_view b, double ratio);

  std::vector<std::vector<double>> rows() const;

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

enum class Preference { A, B, Equal };

// Nine-level answer encoding: "A over B by k" -> k, "B over A by k" -> 1/k,
// equal -> 1. Throws ValidationError for intensities outside 1..9.
double likert_ratio(Preference preferred, int intensity);

// True for the 17 values {1/9, ..., 1/2, 1, 2, ..., 9}.
bool on_scale(double ratio);

enum class WeightMethod { Eigenvector, GeometricMean };

struct EigenResult {
  std::vector<double> weights;  // positive, sums to 1
  double lambda_max = 0;
  std::size_t iterations = 0;
};

inline constexpr std::size_t kMaxIterations = 10'000;
inline constexpr double kTolerance = 1e-12;

// Principal eigenvector by power iteration; ConvergenceError if the
// iteration cap is hit.
EigenResult principal_eigen(const PairwiseMatrix& matrix);

std::vector<double> derive_weights(const PairwiseMatrix& matrix,
                                   WeightMethod method = WeightMethod::Eigenvector);

// Random consistency index for n = 1..10; ValidationError otherwise.
double random_index(std::size_t n);

// ((lambda_max - n) / (n - 1)) / RI(n), clamped at 0; 0 for n <= 2.
double consistency_ratio(const PairwiseMatrix& matrix);

inline constexpr double kConsistencyThreshold = 0.1;
inline constexpr double kStrongAgreement = 0.6;

struct Concordance {
  double w = 0;
  bool strong = false;  // w > 0.6
};

// Kendall's coefficient of concordance. Each inner vector holds one rater's
// ranks (or any scores where smaller is better); ties receive mid-ranks and
// the tie correction is applied.
Concordance kendalls_w(const std::vector<std::vector<double>>& rankings);
// Same, over labeled items; every rater must cover the same item set.
Concordance kendalls_w(const std::vector<std::map<std::string, double>>& rankings);

struct HierarchyItem {
  std::string id;
  std::string label;
};

struct SiblingGroup {
  std::string path;
  std::string kind;
  std::string question;
  std::vector<HierarchyItem> items;

  std::vector<std::string> item_ids() const;
};

struct PairQuestion {
  std::string group;
  std::string a;
  std::string b;
  std::string text;
};

// Tree of sibling groups. A node's path is its group path plus "/" plus its
// id; a node is a leaf unless its path is itself a group.
class Hierarchy {
 public:
  Hierarchy() = default;
  Hierarchy(std::string root, std::vector<SiblingGroup> groups);

  static Hierarchy from_json(std::string_view text);
  static const Hierarchy& builtin();
  std::string to_json() const;

  const std::string& root() const { return root_; }
  const std::vector<SiblingGroup>& groups() const { return groups_; }
  const SiblingGroup* find_group(std::string_view path) const;

  // Leaf paths in group order.
  std::vector<std::string> leaves() const;
  // Leaf paths below `path` (which may be a group or a node path).
  std::vector<std::string> leaves_under(std::string_view path) const;
  // Root-to-node list of (group path, item id) steps.
  std::vector<std::pair<std::string, std::string>> steps(std::string_view node_path) const;
  // Path of the node whose id is `id` (ids are unique in the shipped tree).
  std::optional<std::string> find_node(std::string_view id) const;

  std::vector<PairQuestion> questions(const SiblingGroup& group) const;

 private:
  std::string root_;
  std::vector<SiblingGroup> groups_;
};

struct Provenance {
  std::vector<std::string> experts;
  std::string aggregated_at;
  std::string method;
};

// Local weights per sibling group, keyed by group path and item id, plus the
// derived global weight of every node (product of local weights from root).
class WeightModel {
 public:
  WeightModel() = default;
  WeightModel(const Hierarchy& hierarchy, std::map<std::string, std::map<std::string, double>> local,
              Provenance provenance = {});

  // Level-1 weights attacker model 0.5, impact 0.2, performance 0.15,
  // complexity 0.15; every other group uniform.
  static WeightModel defaults(const Hierarchy& hierarchy = Hierarchy::builtin());

  const std::map<std::string, std::map<std::string, double>>& local() const { return local_; }
  const std::map<std::string, double>& global() const { return global_; }
  const Provenance& provenance() const { return provenance_; }

  double local_weight(std::string_view group, std::string_view item) const;
  // Global weight of a node path; NotFoundError if absent.
  double global_weight(std::string_view node_path) const;

  std::string to_json(const Hierarchy& hierarchy) const;
  static WeightModel from_json(std::string_view text, const Hierarchy& hierarchy = Hierarchy::builtin());

 private:
  std::map<std::string, std::map<std::string, double>> local_;
  std::map<std::string, double> global_;
  Provenance provenance_;
};

struct ExpertResponse {
  std::string expert;
  std::map<std::string, PairwiseMatrix> matrices;  // by group path

  std::vector<std::string> missing_groups(const Hierarchy& hierarchy) const;
};

struct InconsistentGroup {
  std::string expert;
  std::string group;
  double cr = 0;
};

class InconsistentResponsesError : public ValidationError {
 public:
  InconsistentResponsesError(std::string message, std::vector<InconsistentGroup> groups)
      : ValidationError(std::move(message)), groups_(std::move(groups)) {}
  const std::vector<InconsistentGroup>& groups() const { return groups_; }

 private:
  std::vector<InconsistentGroup> groups_;
};

struct Aggregation {
  WeightModel model;
  std::map<std::string, Concordance> group_agreement;  // per sibling group
  Concordance overall;                                 // over global leaf weights
  std::vector<std::string> warnings;
};

struct AggregateOptions {
  WeightMethod method = WeightMethod::Eigenvector;
  std::string timestamp;  // provenance; empty means "now" in UTC
};

// Mean of the experts' derived local weights per group, renormalized.
// Throws InconsistentResponsesError listing every (expert, group) with
// CR >= 0.1, and ValidationError for incomplete responses.
Aggregation aggregate_experts(const std::vector<ExpertResponse>& responses, const Hierarchy& hierarchy,
                              const AggregateOptions& options = {});

// CSV with header expert,group,item_a,item_b,ratio; ratios may be written
// as fractions ("1/3"). Unanswered pairs stay at 1.
std::vector<ExpertResponse> parse_responses_csv(std::string_view text, const Hierarchy& hierarchy);
std::string responses_to_csv(const std::vector<ExpertResponse>& responses);

// Parses "3", "0.5" or "1/3".
double parse_ratio(std::string_view text);

}  // namespace mlrisk::ahp
