#include "ebr/rescaling.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>
#include <thread>

namespace ebr {

std::int64_t rubric_oracle_score(const Judgment& judgment, const Rubric& rubric) {
  if (!rubric.per_sentence_deduction) throw Error("rubric has no per_sentence_deduction for the oracle backend");
  const auto missing = static_cast<std::int64_t>(
      std::set<std::int64_t>(judgment.missing_sentences.begin(), judgment.missing_sentences.end()).size());
  const std::int64_t raw = rubric.scale_max - *rubric.per_sentence_deduction * missing;
  return std::clamp(raw, rubric.scale_min, rubric.scale_max);
}

std::string RubricOracleBackend::complete(const BackendRequest& request) {
  const auto missing =
      std::set<std::int64_t>(request.judgment.missing_sentences.begin(), request.judgment.missing_sentences.end()).size();
  return "Missing sentences: " + std::to_string(missing) + ". Score: " +
         std::to_string(rubric_oracle_score(request.judgment, request.rubric));
}

void RescalePolicy::validate(ScoreScale scale) const {
  if (!scale.contains(static_cast<double>(complete_score))) throw Error("complete_score outside the rubric scale");
  if (!scale.contains(static_cast<double>(missing_all_score))) throw Error("missing_all_score outside the rubric scale");
  if (quantize_to && *quantize_to <= 0) throw Error("quantize_to must be positive");
}

std::int64_t quantize(std::int64_t score, std::int64_t step, ScoreScale scale) {
  auto floor_div = [](std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  };
  // Adding half a step before flooring sends exact halves upward.
  std::int64_t rounded = floor_div(2 * score + step, 2 * step) * step;
  if (rounded > scale.max) rounded -= step;
  if (rounded < scale.min) rounded += step;
  return std::clamp(rounded, scale.min, scale.max);
}

RescaleFailure::RescaleFailure(JudgmentKey key, const std::string& reason, std::optional<std::string> raw_response)
    : Error(to_string(key) + ": " + reason), key_(std::move(key)), reason_(reason), raw_response_(std::move(raw_response)) {}

ScoringMethod method_for(PromptVariant variant) {
  return variant == PromptVariant::with_rubric ? ScoringMethod::ebr : ScoringMethod::ebr_no_rubric;
}

ScoredJudgment rescale_judgment(ScoringBackend& backend, const DatasetBundle& bundle, const Judgment& judgment,
                                const RescaleRequest& request) {
  const ScoreScale scale = scale_of(request.rubric);
  ScoredJudgment out;
  out.key = judgment.key();
  out.method = method_for(request.variant);
  out.backend_id = backend.id();
  out.run_id = request.run_id;

  if (!request.policy.rescale_extremes && is_extreme(judgment.label)) {
    out.score = static_cast<double>(judgment.label == LikertLabel::complete ? request.policy.complete_score
                                                                              : request.policy.missing_all_score);
    out.backend_id = "static-endpoint";
    return out;
  }

  static const PromptConfig default_prompts;
  const PromptConfig& prompts = request.prompts ? *request.prompts : default_prompts;
  const QAItem& item = bundle.item(judgment.item_id);
  const std::string prompt =
      build_rescale_prompt(judgment, item, bundle.document(item.doc_id), request.rubric, request.variant, prompts);

  std::string response;
  try {
    response = backend.complete(BackendRequest{prompt, judgment, request.rubric});
  } catch (const std::exception& e) {
    throw RescaleFailure(judgment.key(), std::string("backend failure: ") + e.what(), std::nullopt);
  }

  std::int64_t score = 0;
  try {
    score = parse_score(response, scale);
  } catch (const NoScoreFound&) {
    throw RescaleFailure(judgment.key(), "no score found in response", response);
  }
  if (request.policy.quantize_to) score = quantize(score, *request.policy.quantize_to, scale);
  out.score = static_cast<double>(score);
  out.raw_response = std::move(response);
  return out;
}

RescaleResult rescale_judgments(ScoringBackend& backend, const DatasetBundle& bundle,
                                std::span<const Judgment> judgments, const RescaleRequest& request,
                                std::size_t concurrency) {
  request.rubric.validate();
  request.policy.validate(scale_of(request.rubric));

  std::vector<std::optional<ScoredJudgment>> slots(judgments.size());
  std::vector<FailedJudgment> failures;
  std::mutex failures_mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < judgments.size(); i = next++) {
      try {
        slots[i] = rescale_judgment(backend, bundle, judgments[i], request);
      } catch (const RescaleFailure& failure) {
        std::lock_guard lock(failures_mutex);
        failures.push_back({i, failure.key(), failure.reason(), failure.raw_response()});
      } catch (const std::exception& e) {
        std::lock_guard lock(failures_mutex);
        failures.push_back({i, judgments[i].key(), e.what(), std::nullopt});
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(judgments.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  RescaleResult result;
  for (auto& slot : slots) {
    if (slot) result.scores.push_back(std::move(*slot));
  }
  std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  result.failures = std::move(failures);
  return result;
}

RescaleResult rescale_bundle(ScoringBackend& backend, const DatasetBundle& bundle, const RescaleRequest& request,
                             std::size_t concurrency) {
  return rescale_judgments(backend, bundle, bundle.judgments(), request, concurrency);
}

}  // namespace ebr
