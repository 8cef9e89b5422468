#pragma once
// Scoring methods that do not read the explanation text: Static, Avg-EBR and
// the missing-sentence heuristic (MSH).

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ebr/dataset.hpp"
#include "ebr/types.hpp"

namespace ebr::baselines {

/// complete -> 100, missing_minor -> 70, missing_major -> 30, missing_all -> 0.
double static_rescale(LikertLabel label);

/// A score per label, monotone in label order and within the scale.
class LabelMapping {
 public:
  /// Values indexed by label_rank. Throws Error if not monotone or out of scale.
  explicit LabelMapping(std::array<double, 4> values, ScoreScale scale = {});

  static LabelMapping static_mapping();

  double operator[](LikertLabel label) const { return values_[static_cast<std::size_t>(label_rank(label))]; }
  const std::array<double, 4>& values() const { return values_; }

 private:
  std::array<double, 4> values_;
};

class MissingLabel : public Error {
 public:
  using Error::Error;
};

struct AvgEbrFit {
  std::array<double, 4> means{};
  std::array<std::size_t, 4> counts{};
  /// Adjacent label pairs whose means are out of order, e.g. "missing_minor > complete".
  std::vector<std::string> violations;

  bool monotone() const { return violations.empty(); }
  /// Throws Error listing the violations when the means are not monotone.
  LabelMapping mapping() const;
};

/// Mean EBR score per label. `labels[i]` is the label of `ebr_scores[i]`.
/// Throws MissingLabel when some label has no scores.
AvgEbrFit fit_avg_ebr_mapping(std::span<const ScoredJudgment> ebr_scores, std::span<const LikertLabel> labels);

/// Looks every score's label up in the bundle.
AvgEbrFit fit_avg_ebr_mapping(std::span<const ScoredJudgment> ebr_scores, const DatasetBundle& bundle);

double apply_mapping(const LabelMapping& mapping, const Judgment& judgment);

/// clamp(100 - deduction * |missing sentences|, 0, 100).
double msh_score(const Judgment& judgment, std::int64_t deduction);
double msh_score(std::size_t missing_count, std::int64_t deduction);

struct DeductionSearch {
  std::int64_t first = 0;
  std::int64_t last = 100;  // inclusive
};

struct DeductionFit {
  std::int64_t deduction = 0;
  double mae = 0.0;
  /// MAE for every candidate in search order.
  std::vector<std::pair<std::int64_t, double>> scan;
};

/// Exhaustive integer search for the deduction minimizing MAE against the
/// reference means. Ties go to the smaller deduction. Throws Error on empty
/// input, an empty range, or a judgment without a reference.
DeductionFit optimize_msh_deduction(std::span<const Judgment> judgments, std::span<const ReferenceScore> references,
                                    DeductionSearch search = {});

/// Scores every judgment of the bundle with one method.
std::vector<ScoredJudgment> score_static(const DatasetBundle& bundle);
std::vector<ScoredJudgment> score_mapping(const DatasetBundle& bundle, const LabelMapping& mapping);
std::vector<ScoredJudgment> score_msh(const DatasetBundle& bundle, std::int64_t deduction);

}  // namespace ebr::baselines
