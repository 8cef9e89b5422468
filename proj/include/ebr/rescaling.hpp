#pragma once
// Explanation-based rescaling: prompt a scoring backend with a judgment and
// rubric, parse the returned number, apply the extreme-label policy.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebr/dataset.hpp"
#include "ebr/prompt.hpp"
#include "ebr/types.hpp"

namespace ebr {

/// What a backend sees for one judgment. Live backends use only the prompt.
struct BackendRequest {
  std::string_view prompt;
  const Judgment& judgment;
  const Rubric& rubric;
};

/// Maps a prompt to response text. Implementations must be callable from
/// several threads at once.
class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;
  virtual std::string id() const = 0;
  /// Identical prompts yield identical text.
  virtual bool deterministic() const = 0;
  virtual std::string complete(const BackendRequest& request) = 0;
};

/// clamp(scale_max - per_sentence_deduction * |missing sentences|, scale).
/// Throws Error when the rubric has no per_sentence_deduction.
std::int64_t rubric_oracle_score(const Judgment& judgment, const Rubric& rubric);

/// Offline deterministic backend answering with rubric_oracle_score. Ignores
/// the explanation.
class RubricOracleBackend final : public ScoringBackend {
 public:
  std::string id() const override { return "rubric-oracle"; }
  bool deterministic() const override { return true; }
  std::string complete(const BackendRequest& request) override;
};

struct RescalePolicy {
  bool rescale_extremes = false;
  std::int64_t complete_score = 100;
  std::int64_t missing_all_score = 0;
  std::optional<std::int64_t> quantize_to;

  /// Throws Error if an endpoint lies outside `scale` or quantize_to <= 0.
  void validate(ScoreScale scale) const;
};

/// Rounds to the nearest multiple of `step` (ties up), kept inside `scale`.
std::int64_t quantize(std::int64_t score, std::int64_t step, ScoreScale scale);

/// A judgment the backend path could not score.
class RescaleFailure : public Error {
 public:
  RescaleFailure(JudgmentKey key, const std::string& reason, std::optional<std::string> raw_response);
  const JudgmentKey& key() const { return key_; }
  const std::string& reason() const { return reason_; }
  const std::optional<std::string>& raw_response() const { return raw_response_; }

 private:
  JudgmentKey key_;
  std::string reason_;
  std::optional<std::string> raw_response_;
};

struct RescaleRequest {
  const Rubric& rubric;
  PromptVariant variant = PromptVariant::with_rubric;
  RescalePolicy policy;
  std::string run_id;
  const PromptConfig* prompts = nullptr;  // defaults when null
};

ScoringMethod method_for(PromptVariant variant);

/// Scores one judgment. Extreme labels get the policy endpoint without a
/// backend call unless policy.rescale_extremes. Throws RescaleFailure.
ScoredJudgment rescale_judgment(ScoringBackend& backend, const DatasetBundle& bundle, const Judgment& judgment,
                                const RescaleRequest& request);

struct FailedJudgment {
  std::size_t index = 0;  // position in the input
  JudgmentKey key;
  std::string reason;
  std::optional<std::string> raw_response;
};

struct RescaleResult {
  std::vector<ScoredJudgment> scores;  // successes, in input order
  std::vector<FailedJudgment> failures;  // in input order

  bool ok() const { return failures.empty(); }
};

/// Scores `judgments` (all from `bundle`) with up to `concurrency` backend
/// calls in flight. Failures are collected, not thrown.
RescaleResult rescale_judgments(ScoringBackend& backend, const DatasetBundle& bundle,
                                std::span<const Judgment> judgments, const RescaleRequest& request,
                                std::size_t concurrency = 1);

RescaleResult rescale_bundle(ScoringBackend& backend, const DatasetBundle& bundle, const RescaleRequest& request,
                             std::size_t concurrency = 1);

}  // namespace ebr
