#pragma once
// Core domain types: documents, QA items, annotator judgments, rubrics, scores.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ebr {

/// Base class for every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SourceSplit { inquisitive, extended };

std::string_view to_string(SourceSplit split);
SourceSplit parse_source_split(std::string_view text);

/// A sentence-segmented article. Sentence numbers are 1-based everywhere
/// outside this struct; `sentence(k)` is the only conversion point.
struct SentenceDocument {
  std::string id;
  std::vector<std::string> sentences;
  SourceSplit source_split = SourceSplit::inquisitive;

  std::size_t size() const { return sentences.size(); }
  bool contains_sentence(std::int64_t one_based) const {
    return one_based >= 1 && static_cast<std::size_t>(one_based) <= sentences.size();
  }
  const std::string& sentence(std::size_t one_based) const { return sentences.at(one_based - 1); }

  friend bool operator==(const SentenceDocument&, const SentenceDocument&) = default;
};

/// The system that produced the answer. Unknown names round-trip verbatim.
struct AnswerSystem {
  enum class Kind { davinci, davinci_003, gpt4, expert_human, other };
  Kind kind = Kind::other;
  std::string other_name;

  static AnswerSystem parse(std::string_view text);
  std::string name() const;

  friend bool operator==(const AnswerSystem&, const AnswerSystem&) = default;
};

struct QAItem {
  std::string id;
  std::string doc_id;
  std::string question_text;
  std::int64_t anchor_sentence = 1;
  std::string answer_text;
  AnswerSystem answer_system;

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

/// Four ordered completeness labels. The underlying value is the rank used
/// by every rank statistic (missing_all lowest).
enum class LikertLabel : int { missing_all = 0, missing_major = 1, missing_minor = 2, complete = 3 };

inline constexpr std::array<LikertLabel, 4> kAllLabels = {
    LikertLabel::missing_all, LikertLabel::missing_major, LikertLabel::missing_minor,
    LikertLabel::complete};

inline constexpr int label_rank(LikertLabel label) { return static_cast<int>(label); }
inline constexpr bool is_extreme(LikertLabel label) {
  return label == LikertLabel::complete || label == LikertLabel::missing_all;
}

std::string_view to_string(LikertLabel label);
/// Accepts the canonical snake_case names; throws Error otherwise.
LikertLabel parse_label(std::string_view text);
std::optional<LikertLabel> try_parse_label(std::string_view text);

/// Identity of a judgment inside a dataset.
struct JudgmentKey {
  std::string item_id;
  std::string annotator;

  friend auto operator<=>(const JudgmentKey&, const JudgmentKey&) = default;
  friend bool operator==(const JudgmentKey&, const JudgmentKey&) = default;
};

std::string to_string(const JudgmentKey& key);

struct Judgment {
  std::string item_id;
  std::string annotator_id;
  LikertLabel label = LikertLabel::complete;
  // Kept in the model; rescaling only looks at completeness.
  bool correctness = true;
  std::string explanation;
  // 1-based, ascending, unique.
  std::vector<std::int64_t> missing_sentences;

  JudgmentKey key() const { return {item_id, annotator_id}; }

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

struct DeductionRule {
  std::string description;
  std::int64_t points = 0;

  friend bool operator==(const DeductionRule&, const DeductionRule&) = default;
};

struct Rubric {
  std::string aspect_name;
  std::string aspect_definition;
  std::int64_t scale_min = 0;
  std::int64_t scale_max = 100;
  std::vector<DeductionRule> deduction_rules;
  std::optional<std::int64_t> per_sentence_deduction;

  /// Throws Error describing the first violated invariant.
  void validate() const;

  friend bool operator==(const Rubric&, const Rubric&) = default;
};

struct ScoreScale {
  std::int64_t min = 0;
  std::int64_t max = 100;

  bool contains(double value) const { return value >= static_cast<double>(min) && value <= static_cast<double>(max); }
};

inline ScoreScale scale_of(const Rubric& rubric) { return {rubric.scale_min, rubric.scale_max}; }

enum class ScoringMethod { ebr, ebr_no_rubric, static_mapping, avg_ebr, msh, reference, oracle };

std::string_view to_string(ScoringMethod method);
ScoringMethod parse_method(std::string_view text);

/// A judgment mapped onto the numeric scale. Scores produced by the LLM path,
/// Static and MSH are integral; Avg-EBR scores are label means and may not be.
struct ScoredJudgment {
  JudgmentKey key;
  double score = 0.0;
  ScoringMethod method = ScoringMethod::ebr;
  std::string backend_id;
  std::string run_id;
  std::optional<std::string> raw_response;

  friend bool operator==(const ScoredJudgment&, const ScoredJudgment&) = default;
};

struct ReferenceScore {
  JudgmentKey key;
  std::vector<std::int64_t> expert_scores;

  double mean_score() const;

  friend bool operator==(const ReferenceScore&, const ReferenceScore&) = default;
};

/// Raw, possibly inconsistent collection of records. See DatasetBundle for
/// the cross-linked, validated form.
struct Dataset {
  std::vector<SentenceDocument> documents;
  std::vector<QAItem> items;
  std::vector<Judgment> judgments;
  std::optional<std::vector<ReferenceScore>> references;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace ebr
