#pragma once
// Rank correlation, error and chance-corrected agreement statistics.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ebr/types.hpp"

namespace ebr::metrics {

/// Paired observations sharing an item identity.
struct PairedScores {
  std::vector<double> x;
  std::vector<double> y;

  PairedScores() = default;
  PairedScores(std::vector<double> xs, std::vector<double> ys);

  void add(double a, double b) {
    x.push_back(a);
    y.push_back(b);
  }
  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }
};

class MetricError : public Error {
 public:
  using Error::Error;
};

/// Thrown when one margin is entirely tied and tau-b has a zero denominator.
class UndefinedTau : public MetricError {
 public:
  using MetricError::MetricError;
};

double mae(const PairedScores& pairs);

struct TauResult {
  double tau = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;

  bool significant(double alpha = 0.05) const { return p_value < alpha; }
};

/// Kendall tau-b with the tie-adjusted normal approximation for the
/// two-sided p-value (approximate for n < 10). O(n log n).
/// Throws MetricError for n < 2, UndefinedTau when a margin is all-tied.
TauResult kendall_tau_b(const PairedScores& pairs);

/// Same as kendall_tau_b but returns nullopt for an all-tied margin.
std::optional<TauResult> try_kendall_tau_b(const PairedScores& pairs);

/// Per-item category counts; every row must have the same total.
struct RatingMatrix {
  std::vector<std::vector<int>> counts;
};

/// Classical Fleiss kappa. Throws MetricError on unequal rater counts,
/// fewer than 2 items or raters, or chance agreement of exactly 1.
double fleiss_kappa(const RatingMatrix& matrix);

/// complete -> 1, everything else -> 0.
int collapse_binary(LikertLabel label);

using ScoresByAnnotator = std::map<std::string, std::map<std::string, double>>;

struct PairTau {
  std::string first;
  std::string second;
  std::size_t overlap = 0;
  std::optional<TauResult> tau;  // nullopt: undefined (tied margin) or overlap too small
  bool included = false;
  std::string exclusion_reason;
};

struct AggregateTau {
  double aggregate = 0.0;
  std::size_t included_pairs = 0;
  std::vector<PairTau> pairs;  // every unordered pair, lexicographic order
  /// Alternative aggregate where pairs with a tied margin (but enough
  /// overlap) count as tau = 0.
  std::optional<double> aggregate_undefined_as_zero;
};

inline constexpr std::size_t kDefaultMinOverlap = 10;

/// Mean tau-b over annotator pairs, each computed on co-rated items.
/// Throws MetricError with fewer than 2 annotators or zero valid pairs.
AggregateTau pairwise_aggregate_tau(const ScoresByAnnotator& scores, std::size_t min_overlap = kDefaultMinOverlap);

struct LabelDistributionRow {
  std::string group;
  std::size_t total = 0;
  std::array<double, 4> percent{};  // indexed by label_rank
};

enum class GroupBy { overall, system, annotator };

/// Percentages of each label per group. Requires non-empty input.
/// `system_of_item` maps item id to answer system name and is used for
/// GroupBy::system only.
std::vector<LabelDistributionRow> label_distribution(std::span<const Judgment> judgments, GroupBy group_by,
                                                     const std::map<std::string, std::string>& system_of_item = {});

/// Half-up rounding used for display.
long long round_half_up(double value);

}  // namespace ebr::metrics
