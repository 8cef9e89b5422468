#include "ebr/types.hpp"

#include <numeric>

namespace ebr {

std::string_view to_string(SourceSplit split) {
  switch (split) {
    case SourceSplit::inquisitive:
      return "inquisitive";
    case SourceSplit::extended:
      return "extended";
  }
  return "inquisitive";
}

SourceSplit parse_source_split(std::string_view text) {
  if (text == "inquisitive") return SourceSplit::inquisitive;
  if (text == "extended") return SourceSplit::extended;
  throw Error("unknown split '" + std::string(text) + "'");
}

AnswerSystem AnswerSystem::parse(std::string_view text) {
  AnswerSystem system;
  if (text == "davinci") {
    system.kind = Kind::davinci;
  } else if (text == "davinci_003") {
    system.kind = Kind::davinci_003;
  } else if (text == "gpt4") {
    system.kind = Kind::gpt4;
  } else if (text == "expert_human") {
    system.kind = Kind::expert_human;
  } else {
    system.kind = Kind::other;
    system.other_name = std::string(text);
  }
  return system;
}

std::string AnswerSystem::name() const {
  switch (kind) {
    case Kind::davinci:
      return "davinci";
    case Kind::davinci_003:
      return "davinci_003";
    case Kind::gpt4:
      return "gpt4";
    case Kind::expert_human:
      return "expert_human";
    case Kind::other:
      return other_name;
  }
  return other_name;
}

std::string_view to_string(LikertLabel label) {
  switch (label) {
    case LikertLabel::missing_all:
      return "missing_all";
    case LikertLabel::missing_major:
      return "missing_major";
    case LikertLabel::missing_minor:
      return "missing_minor";
    case LikertLabel::complete:
      return "complete";
  }
  return "complete";
}

std::optional<LikertLabel> try_parse_label(std::string_view text) {
  for (LikertLabel label : kAllLabels) {
    if (to_string(label) == text) return label;
  }
  return std::nullopt;
}

LikertLabel parse_label(std::string_view text) {
  if (auto label = try_parse_label(text)) return *label;
  throw Error("unknown label '" + std::string(text) + "'");
}

std::string to_string(const JudgmentKey& key) {
  return "(item " + key.item_id + ", annotator " + key.annotator + ")";
}

void Rubric::validate() const {
  if (scale_min >= scale_max) {
    throw Error("rubric scale_min must be below scale_max");
  }
  const std::int64_t span = scale_max - scale_min;
  for (const auto& rule : deduction_rules) {
    if (rule.points < 0 || rule.points > span) {
      throw Error("rubric rule '" + rule.description + "' deducts " + std::to_string(rule.points) +
                  " points, outside 0.." + std::to_string(span));
    }
  }
  if (per_sentence_deduction && *per_sentence_deduction < 0) {
    throw Error("rubric per_sentence_deduction must be non-negative");
  }
}

std::string_view to_string(ScoringMethod method) {
  switch (method) {
    case ScoringMethod::ebr:
      return "ebr";
    case ScoringMethod::ebr_no_rubric:
      return "ebr_no_rubric";
    case ScoringMethod::static_mapping:
      return "static";
    case ScoringMethod::avg_ebr:
      return "avg_ebr";
    case ScoringMethod::msh:
      return "msh";
    case ScoringMethod::reference:
      return "reference";
    case ScoringMethod::oracle:
      return "oracle";
  }
  return "ebr";
}

ScoringMethod parse_method(std::string_view text) {
  for (auto method : {ScoringMethod::ebr, ScoringMethod::ebr_no_rubric, ScoringMethod::static_mapping,
                      ScoringMethod::avg_ebr, ScoringMethod::msh, ScoringMethod::reference,
                      ScoringMethod::oracle}) {
    if (to_string(method) == text) return method;
  }
  throw Error("unknown scoring method '" + std::string(text) + "'");
}

double ReferenceScore::mean_score() const {
  if (expert_scores.empty()) return 0.0;
  const double total = std::accumulate(expert_scores.begin(), expert_scores.end(), 0.0);
  return total / static_cast<double>(expert_scores.size());
}

}  // namespace ebr
