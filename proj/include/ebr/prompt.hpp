#pragma once
// Rescaling prompt construction and score extraction.

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "ebr/types.hpp"

namespace ebr {

enum class PromptVariant { with_rubric, without_rubric };

std::string_view to_string(PromptVariant variant);
PromptVariant parse_variant(std::string_view text);

/// One sentence per label, shown to the model as the level of missing information.
class LabelDefinitions {
 public:
  /// The table shipped in resources/label_definitions.json.
  static LabelDefinitions defaults();
  /// Parses a JSON object keyed by label name; all four labels required.
  static LabelDefinitions from_json_text(std::string_view text);
  static LabelDefinitions load(const std::filesystem::path& path);

  const std::string& operator[](LikertLabel label) const { return text_[static_cast<std::size_t>(label_rank(label))]; }

 private:
  std::array<std::string, 4> text_;
};

/// Template text per variant. Placeholders: {aspect} {aspect_definition}
/// {scale_min} {scale_max} {article} {question} {answer} {feedback}
/// {label_definition} {missing_sentences} {rubric}.
struct PromptTemplates {
  std::string with_rubric;
  std::string without_rubric;

  static PromptTemplates defaults();
  /// Reads with_rubric.txt and without_rubric.txt from `dir`.
  static PromptTemplates load(const std::filesystem::path& dir);

  const std::string& operator[](PromptVariant variant) const {
    return variant == PromptVariant::with_rubric ? with_rubric : without_rubric;
  }
};

struct PromptConfig {
  PromptTemplates templates = PromptTemplates::defaults();
  LabelDefinitions labels = LabelDefinitions::defaults();
};

/// Substitutes {name} placeholders in one pass; substituted text is never
/// rescanned. Braces that do not name a known placeholder are kept verbatim.
std::string render_template(std::string_view text, const std::map<std::string, std::string, std::less<>>& values);

std::string render_article(const SentenceDocument& document);
std::string render_rubric_rules(const Rubric& rubric);
/// Sorted, de-duplicated, comma separated; "none" when empty.
std::string render_missing_sentences(const std::vector<std::int64_t>& indices);

std::string build_rescale_prompt(const Judgment& judgment, const QAItem& item, const SentenceDocument& document,
                                 const Rubric& rubric, PromptVariant variant, const PromptConfig& config = {});

/// No in-range integer in a backend response.
class NoScoreFound : public Error {
 public:
  explicit NoScoreFound(std::string raw_text);
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

/// The last standalone integer in `text` that lies within `scale`. Digit runs
/// that belong to a decimal ("7.5") or a denominator ("/100") do not count.
std::int64_t parse_score(std::string_view text, ScoreScale scale);

}  // namespace ebr
