#include "ebr/prompt.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "ebr/embedded_resources.hpp"
#include "ebr/io.hpp"

namespace ebr {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_identifier_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_digit(c) || c == '_';
}

}  // namespace

std::string_view to_string(PromptVariant variant) {
  return variant == PromptVariant::with_rubric ? "with_rubric" : "without_rubric";
}

PromptVariant parse_variant(std::string_view text) {
  if (text == "with_rubric") return PromptVariant::with_rubric;
  if (text == "without_rubric") return PromptVariant::without_rubric;
  throw Error("unknown prompt variant '" + std::string(text) + "'");
}

LabelDefinitions LabelDefinitions::defaults() { return from_json_text(resources::label_definitions_json); }

LabelDefinitions LabelDefinitions::from_json_text(std::string_view text) {
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("label definitions: ") + e.what());
  }
  LabelDefinitions out;
  for (auto label : kAllLabels) {
    auto it = value.find(std::string(to_string(label)));
    if (it == value.end() || !it->is_string()) {
      throw Error("label definitions: missing text for " + std::string(to_string(label)));
    }
    out.text_[static_cast<std::size_t>(label_rank(label))] = it->get<std::string>();
  }
  return out;
}

LabelDefinitions LabelDefinitions::load(const std::filesystem::path& path) {
  return from_json_text(io::read_text_file(path));
}

PromptTemplates PromptTemplates::defaults() {
  return {std::string(resources::with_rubric_template), std::string(resources::without_rubric_template)};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  return {io::read_text_file(dir / "with_rubric.txt"), io::read_text_file(dir / "without_rubric.txt")};
}

std::string render_template(std::string_view text, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(text.size() * 2);
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t end = i + 1;
      while (end < text.size() && is_identifier_char(text[end])) ++end;
      if (end < text.size() && text[end] == '}' && end > i + 1) {
        auto it = values.find(text.substr(i + 1, end - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = end + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

std::string render_article(const SentenceDocument& document) {
  std::string out;
  for (std::size_t k = 1; k <= document.size(); ++k) {
    if (k > 1) out += '\n';
    out += "[" + std::to_string(k) + "] " + document.sentence(k);
  }
  return out;
}

std::string render_rubric_rules(const Rubric& rubric) {
  std::string out;
  for (std::size_t i = 0; i < rubric.deduction_rules.size(); ++i) {
    const auto& rule = rubric.deduction_rules[i];
    if (i > 0) out += '\n';
    out += "- " + rule.description + ": deduct " + std::to_string(rule.points) + " points";
  }
  return out;
}

std::string render_missing_sentences(const std::vector<std::int64_t>& indices) {
  if (indices.empty()) return "none";
  std::set<std::int64_t> sorted(indices.begin(), indices.end());
  std::string out;
  for (auto index : sorted) {
    if (!out.empty()) out += ", ";
    out += std::to_string(index);
  }
  return out;
}

std::string build_rescale_prompt(const Judgment& judgment, const QAItem& item, const SentenceDocument& document,
                                 const Rubric& rubric, PromptVariant variant, const PromptConfig& config) {
  std::map<std::string, std::string, std::less<>> values{
      {"aspect", rubric.aspect_name},
      {"aspect_definition", rubric.aspect_definition},
      {"scale_min", std::to_string(rubric.scale_min)},
      {"scale_max", std::to_string(rubric.scale_max)},
      {"article", render_article(document)},
      {"question", item.question_text},
      {"answer", item.answer_text},
      {"feedback", judgment.explanation},
      {"label_definition", config.labels[judgment.label]},
      {"missing_sentences", render_missing_sentences(judgment.missing_sentences)},
  };
  if (variant == PromptVariant::with_rubric) values.emplace("rubric", render_rubric_rules(rubric));
  return render_template(config.templates[variant], values);
}

NoScoreFound::NoScoreFound(std::string raw_text)
    : Error("no in-range score found in backend response"), raw_text_(std::move(raw_text)) {}

std::int64_t parse_score(std::string_view text, ScoreScale scale) {
  std::optional<std::int64_t> last;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < text.size() && is_digit(text[i])) ++i;
    const std::size_t end = i;

    const bool fractional_part = start >= 2 && text[start - 1] == '.' && is_digit(text[start - 2]);
    const bool integral_part = end + 1 < text.size() && text[end] == '.' && is_digit(text[end + 1]);
    const bool denominator = start >= 1 && text[start - 1] == '/';
    if (fractional_part || integral_part || denominator) continue;

    const auto digits = text.substr(start, end - start);
    if (digits.size() > 12) continue;
    std::int64_t value = 0;
    for (char c : digits) value = value * 10 + (c - '0');
    if (value >= scale.min && value <= scale.max) last = value;
  }
  if (!last) throw NoScoreFound(std::string(text));
  return *last;
}

}  // namespace ebr
