#pragma once
// Result tables: method vs. reference, expert agreement, annotator agreement
// before and after rescaling, per-label means and run-to-run stability.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ebr/dataset.hpp"
#include "ebr/metrics.hpp"
#include "ebr/rescaling.hpp"

namespace ebr::evaluation {

/// A subset of judgments: all of them, or those with one label.
struct Slice {
  std::string name;
  std::optional<LikertLabel> label;

  static Slice overall() { return {"overall", std::nullopt}; }
  static Slice of(LikertLabel label) { return {std::string(to_string(label)), label}; }
  /// "overall" or a label name.
  static Slice parse(std::string_view text);

  bool contains(LikertLabel value) const { return !label || *label == value; }
};

/// overall, missing_minor, missing_major.
std::vector<Slice> default_slices();

struct SliceMetrics {
  std::string slice;
  std::size_t n = 0;
  double mae = 0.0;
  std::optional<metrics::TauResult> tau;
  std::string tau_note;  // why tau is undefined
};

struct EvalReport {
  std::string method;
  std::vector<SliceMetrics> slices;

  const SliceMetrics& slice(std::string_view name) const;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Tau-b and MAE of method scores against reference means per slice. Tau is
/// undefined (not zero) when the method is constant within the slice.
/// Throws EvaluationError for an empty slice or a score without judgment.
EvalReport evaluate_against_reference(std::string method_name, std::span<const ScoredJudgment> method_scores,
                                      const DatasetBundle& bundle, std::span<const Slice> slices);

struct ExpertPairReport {
  std::size_t first = 0;  // 1-based expert columns
  std::size_t second = 0;
  std::vector<SliceMetrics> slices;
};

/// Every pair of expert columns, compared on the references that carry both.
/// Throws EvaluationError when fewer than 2 expert columns exist.
std::vector<ExpertPairReport> expert_agreement(const DatasetBundle& bundle, std::span<const Slice> slices);

/// Label ranks keyed annotator -> item.
metrics::ScoresByAnnotator label_scores(std::span<const Judgment> judgments);
/// Scores keyed annotator -> item.
metrics::ScoresByAnnotator method_scores(std::span<const ScoredJudgment> scores);

struct PairShift {
  std::string first;
  std::string second;
  std::optional<double> pre;
  std::optional<double> post;
  std::optional<double> delta;
};

struct AgreementShift {
  metrics::AggregateTau pre;
  metrics::AggregateTau post;
  std::vector<PairShift> pairs;
};

/// Pairwise aggregate tau on labels (pre) and on rescaled scores (post).
/// Throws EvaluationError when the two inputs cover different judgments.
AgreementShift agreement_shift(const metrics::ScoresByAnnotator& original_labels,
                               const metrics::ScoresByAnnotator& rescaled_scores,
                               std::size_t min_overlap = metrics::kDefaultMinOverlap);

struct LabelAverage {
  LikertLabel label;
  double mean = 0.0;
  std::size_t count = 0;
};

struct LabelAverages {
  std::vector<LabelAverage> rows;  // label order, absent labels omitted
  std::vector<std::string> order_violations;
};

LabelAverages avg_score_per_label(std::span<const ScoredJudgment> scores, const DatasetBundle& bundle);

struct StabilityRow {
  std::string run_id;
  std::size_t scored = 0;
  std::size_t failures = 0;
  double avg_score = 0.0;
  std::optional<metrics::TauResult> tau;
  double mae = 0.0;
};

struct Spread {
  double min = 0.0;
  double max = 0.0;
  double range() const { return max - min; }
};

struct StabilityReport {
  std::vector<StabilityRow> runs;
  Spread avg_score;
  Spread tau;
  Spread mae;
};

/// Builds the backend for one run. Live backends should bypass the shared
/// cache here; a cached answer says nothing about stability.
using BackendFactory = std::function<std::unique_ptr<ScoringBackend>(const std::string& run_id)>;

/// Rescales the referenced judgments `n_runs` times with distinct run ids
/// ("{base_run_id}-run{k}") and reports per-run average, tau and MAE.
StabilityReport stability_run(const BackendFactory& make_backend, const DatasetBundle& bundle,
                              const RescaleRequest& request, int n_runs, std::size_t concurrency = 1);

// Text rendering. Tau uses two decimals with a dagger when p < 0.05 and a
// dash when undefined.
std::string format_tau(const std::optional<metrics::TauResult>& tau);
std::string render_eval_table(std::span<const EvalReport> reports);
std::string render_expert_table(std::span<const ExpertPairReport> pairs);
std::string render_agreement(const AgreementShift& shift);
std::string render_label_averages(const LabelAverages& averages);
std::string render_stability(const StabilityReport& report);

// Machine-readable records {metric, slice, value, p_value?, n, ...}.
std::vector<nlohmann::ordered_json> to_records(const EvalReport& report);
std::vector<nlohmann::ordered_json> to_records(std::span<const ExpertPairReport> pairs);
std::vector<nlohmann::ordered_json> to_records(const AgreementShift& shift, std::string_view method);
std::vector<nlohmann::ordered_json> to_records(const LabelAverages& averages, std::string_view method);
std::vector<nlohmann::ordered_json> to_records(const StabilityReport& report);

/// (reference, score) points per judgment, for plotting.
std::vector<nlohmann::ordered_json> score_points(std::span<const ScoredJudgment> scores, const DatasetBundle& bundle);

}  // namespace ebr::evaluation
