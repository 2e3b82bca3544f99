#ifndef DIECLUST_REVIEW_HPP
#define DIECLUST_REVIEW_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dieclust/distance_matrix.hpp"
#include "dieclust/metrics.hpp"
#include "dieclust/partition.hpp"

namespace dieclust {

/// Replaces a cluster by groups that cover it exactly. The first group
/// keeps the cluster id; the others get fresh ids in order.
struct SplitOp {
  int cluster = 0;
  std::vector<std::vector<int>> groups;  ///< item indices
};
/// Unions `b` into `a`; `a` keeps its id. Counts as one comparison.
struct MergeOp {
  int a = 0;
  int b = 0;
};
struct ValidateOp {
  int cluster = 0;
};
struct RepresentativeOp {
  int cluster = 0;
  int item = 0;
};
/// One representative comparison. `same` merges b into a.
struct CompareOp {
  int a = 0;
  int b = 0;
  bool same = false;
};

using ReviewOp = std::variant<SplitOp, MergeOp, ValidateOp, RepresentativeOp, CompareOp>;

class ReviewOpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ClusterStatus { unreviewed, validated };

struct ReviewState {
  std::map<int, std::vector<int>> clusters;  ///< id -> sorted item indices
  std::map<int, ClusterStatus> status;
  std::map<int, int> representative;         ///< explicit choices only
  std::set<std::pair<int, int>> compared;    ///< (lo, hi) decided "different"
  std::uint64_t comparisons = 0;
  int next_id = 1;
  int max_clusters = 0;  ///< largest cluster count reached so far

  std::size_t num_items() const;
  Partition partition() const;
  /// Cluster id per item.
  std::vector<int> cluster_of() const;
};

/// Cluster ids start at 1 in the order clusters first appear in `base`.
ReviewState initial_review_state(const Partition& base);

/// Throws ReviewOpError on unknown clusters or items and on splits whose
/// groups are empty, overlapping, or not covering.
void apply_review_op(ReviewState& state, const ReviewOp& op);
ReviewState apply_review_ops(const Partition& base, const std::vector<ReviewOp>& ops);

/// Wire format: {"type":"split","cluster":c,"groups":[[item ids]..]},
/// {"type":"merge","clusters":[a,b]}, {"type":"validate","cluster":c},
/// {"type":"representative","cluster":c,"image":id},
/// {"type":"compare","clusters":[a,b],"same":bool}.
nlohmann::json review_op_to_json(const ReviewOp& op, const std::vector<std::string>& ids);
ReviewOp review_op_from_json(const nlohmann::json& j,
                             const std::map<std::string, int>& index_of_id);

enum class ComparisonOrder { ascending_distance, badly_preserved_first };

struct ComparisonSuggestion {
  int a = 0;
  int b = 0;
  int rep_a = 0;
  int rep_b = 0;
  double distance = 0.0;
};

struct ClusterSummary {
  int id = 0;
  std::vector<int> members;
  int representative = 0;
  ClusterStatus status = ClusterStatus::unreviewed;
  double mean_within_distance = 0.0;  ///< 0 for singletons
};

class VersionConflict : public std::runtime_error {
 public:
  VersionConflict(std::uint64_t expected, std::uint64_t actual);
  std::uint64_t actual() const { return actual_; }

 private:
  std::uint64_t actual_;
};

/// Base partition plus event log; the state is always fold(base, log).
/// Not internally synchronized.
class ReviewSession {
 public:
  ReviewSession(Partition base, std::vector<std::string> ids, std::vector<int> grades = {},
                std::optional<DistanceMatrix> distances = std::nullopt);

  std::uint64_t version() const { return log_.size(); }
  const ReviewState& state() const { return state_; }
  const Partition& base() const { return base_; }
  const std::vector<ReviewOp>& log() const { return log_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<int>& grades() const { return grades_; }
  const std::map<std::string, int>& index_of_id() const { return index_; }

  /// All-or-nothing append; throws VersionConflict when `expected_version`
  /// is not the current version.
  std::uint64_t submit(const std::vector<ReviewOp>& ops, std::uint64_t expected_version);

  /// Explicit choice, else the best-preserved member (lowest grade), else
  /// the member with the smallest summed distance to the others.
  int representative(int cluster) const;
  ClusterSummary summary(int cluster) const;
  /// sort_by: "size" (descending) or "cohesion" (ascending mean within d).
  std::vector<ClusterSummary> summaries(const std::string& sort_by = "size") const;

  std::optional<ComparisonSuggestion> next_comparison(
      ComparisonOrder order = ComparisonOrder::ascending_distance) const;

  VerificationBound bound() const;
  void write_labels_csv(std::ostream& out) const;

 private:
  double d(int i, int j) const;

  Partition base_;
  std::vector<std::string> ids_;
  std::vector<int> grades_;
  std::optional<DistanceMatrix> distances_;
  std::map<std::string, int> index_;
  std::vector<ReviewOp> log_;
  ReviewState state_;
};

}  // namespace dieclust

#endif
