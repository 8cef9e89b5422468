#include "ebr/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ebr::io {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

/// Typed accessors over one parsed record, reporting errors with location.
class Record {
 public:
  Record(const json& value, const fs::path& file, std::size_t line) : value_(value), file_(file), line_(line) {
    if (!value_.is_object()) fail("expected a JSON object");
  }

  [[noreturn]] void fail(const std::string& message) const { throw ParseError(file_, line_, message); }

  const json& required(const char* name) const {
    auto it = value_.find(name);
    if (it == value_.end() || it->is_null()) fail(std::string("missing required field '") + name + "'");
    return *it;
  }

  std::string string(const char* name) const {
    const auto& field = required(name);
    if (!field.is_string()) fail(std::string("field '") + name + "' must be a string");
    return field.get<std::string>();
  }

  std::optional<std::string> optional_string(const char* name) const {
    auto it = value_.find(name);
    if (it == value_.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) fail(std::string("field '") + name + "' must be a string");
    return it->get<std::string>();
  }

  std::int64_t integer(const char* name) const { return as_integer(required(name), name); }

  double number(const char* name) const {
    const auto& field = required(name);
    if (!field.is_number()) fail(std::string("field '") + name + "' must be a number");
    return field.get<double>();
  }

  bool boolean(const char* name) const {
    const auto& field = required(name);
    if (!field.is_boolean()) fail(std::string("field '") + name + "' must be a boolean");
    return field.get<bool>();
  }

  std::vector<std::int64_t> integers(const char* name) const {
    const auto& field = required(name);
    if (!field.is_array()) fail(std::string("field '") + name + "' must be an array");
    std::vector<std::int64_t> out;
    out.reserve(field.size());
    for (const auto& element : field) out.push_back(as_integer(element, name));
    return out;
  }

  std::vector<std::string> strings(const char* name) const {
    const auto& field = required(name);
    if (!field.is_array()) fail(std::string("field '") + name + "' must be an array");
    std::vector<std::string> out;
    out.reserve(field.size());
    for (const auto& element : field) {
      if (!element.is_string()) fail(std::string("field '") + name + "' must contain strings");
      out.push_back(element.get<std::string>());
    }
    return out;
  }

  template <typename Fn>
  auto convert(const char* name, Fn&& fn) const {
    try {
      return fn();
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      fail(std::string("field '") + name + "': " + e.what());
    }
  }

 private:
  std::int64_t as_integer(const json& field, const char* name) const {
    if (field.is_number_integer()) return field.get<std::int64_t>();
    if (field.is_number_float()) {
      const double value = field.get<double>();
      if (std::floor(value) == value) return static_cast<std::int64_t>(value);
    }
    fail(std::string("field '") + name + "' must be an integer");
  }

  const json& value_;
  const fs::path& file_;
  std::size_t line_;
};

template <typename T, typename Parse>
std::vector<T> read_jsonl(const fs::path& path, Parse&& parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::vector<T> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path, number, std::string("malformed JSON: ") + e.what());
    }
    out.push_back(parse(Record(value, path, number)));
  }
  return out;
}

SentenceDocument parse_document(const Record& r) {
  SentenceDocument doc;
  doc.id = r.string("id");
  doc.source_split = r.convert("split", [&] { return parse_source_split(r.string("split")); });
  doc.sentences = r.strings("sentences");
  return doc;
}

QAItem parse_item(const Record& r) {
  QAItem item;
  item.id = r.string("id");
  item.doc_id = r.string("doc_id");
  item.question_text = r.string("question");
  item.anchor_sentence = r.integer("anchor");
  item.answer_text = r.string("answer");
  item.answer_system = AnswerSystem::parse(r.string("system"));
  return item;
}

Judgment parse_judgment(const Record& r) {
  Judgment judgment;
  judgment.item_id = r.string("item_id");
  judgment.annotator_id = r.string("annotator");
  judgment.label = r.convert("label", [&] { return parse_label(r.string("label")); });
  judgment.correctness = r.boolean("correct");
  judgment.explanation = r.string("explanation");
  judgment.missing_sentences = r.integers("missing_sentences");
  return judgment;
}

ReferenceScore parse_reference(const Record& r) {
  ReferenceScore reference;
  reference.key = {r.string("item_id"), r.string("annotator")};
  reference.expert_scores = r.integers("expert_scores");
  return reference;
}

ScoredJudgment parse_score(const Record& r) {
  ScoredJudgment score;
  score.key = {r.string("item_id"), r.string("annotator")};
  score.method = r.convert("method", [&] { return parse_method(r.string("method")); });
  score.backend_id = r.string("backend");
  score.run_id = r.string("run_id");
  score.score = r.number("score");
  score.raw_response = r.optional_string("raw_response");
  return score;
}

template <typename T>
std::string to_jsonl(const std::vector<T>& records) {
  std::string out;
  for (const auto& record : records) {
    out += to_json(record).dump();
    out += '\n';
  }
  return out;
}

}  // namespace

ParseError::ParseError(fs::path file, std::size_t line, const std::string& message)
    : Error(file.string() + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message),
      file_(std::move(file)),
      line_(line) {}

ordered_json number_json(double value) {
  if (std::isfinite(value) && std::floor(value) == value && std::fabs(value) < 9.0e15) {
    return static_cast<std::int64_t>(value);
  }
  return value;
}

ordered_json to_json(const SentenceDocument& document) {
  ordered_json out;
  out["id"] = document.id;
  out["split"] = std::string(to_string(document.source_split));
  out["sentences"] = document.sentences;
  return out;
}

ordered_json to_json(const QAItem& item) {
  ordered_json out;
  out["id"] = item.id;
  out["doc_id"] = item.doc_id;
  out["question"] = item.question_text;
  out["anchor"] = item.anchor_sentence;
  out["answer"] = item.answer_text;
  out["system"] = item.answer_system.name();
  return out;
}

ordered_json to_json(const Judgment& judgment) {
  ordered_json out;
  out["item_id"] = judgment.item_id;
  out["annotator"] = judgment.annotator_id;
  out["label"] = std::string(to_string(judgment.label));
  out["correct"] = judgment.correctness;
  out["explanation"] = judgment.explanation;
  out["missing_sentences"] = judgment.missing_sentences;
  return out;
}

ordered_json to_json(const ReferenceScore& reference) {
  ordered_json out;
  out["item_id"] = reference.key.item_id;
  out["annotator"] = reference.key.annotator;
  out["expert_scores"] = reference.expert_scores;
  return out;
}

ordered_json to_json(const ScoredJudgment& score) {
  ordered_json out;
  out["item_id"] = score.key.item_id;
  out["annotator"] = score.key.annotator;
  out["method"] = std::string(to_string(score.method));
  out["backend"] = score.backend_id;
  out["run_id"] = score.run_id;
  out["score"] = number_json(score.score);
  if (score.raw_response) out["raw_response"] = *score.raw_response;
  return out;
}

ordered_json to_json(const Rubric& rubric) {
  ordered_json out;
  out["aspect"] = rubric.aspect_name;
  out["definition"] = rubric.aspect_definition;
  out["scale"] = {rubric.scale_min, rubric.scale_max};
  out["rules"] = ordered_json::array();
  for (const auto& rule : rubric.deduction_rules) {
    out["rules"].push_back(ordered_json{{"desc", rule.description}, {"points", rule.points}});
  }
  if (rubric.per_sentence_deduction) out["per_sentence_deduction"] = *rubric.per_sentence_deduction;
  return out;
}

Rubric rubric_from_json(const json& value) {
  const fs::path where("rubric");
  Record r(value, where, 0);
  Rubric rubric;
  rubric.aspect_name = r.string("aspect");
  rubric.aspect_definition = r.string("definition");
  auto scale = r.integers("scale");
  if (scale.size() != 2) r.fail("field 'scale' must be [min, max]");
  rubric.scale_min = scale[0];
  rubric.scale_max = scale[1];
  const auto& rules = r.required("rules");
  if (!rules.is_array()) r.fail("field 'rules' must be an array");
  for (const auto& rule_json : rules) {
    Record rule(rule_json, where, 0);
    rubric.deduction_rules.push_back({rule.string("desc"), rule.integer("points")});
  }
  if (value.contains("per_sentence_deduction") && !value["per_sentence_deduction"].is_null()) {
    rubric.per_sentence_deduction = r.integer("per_sentence_deduction");
  }
  return rubric;
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError(dir, 0, "not a directory");
  Dataset dataset;
  dataset.documents = read_jsonl<SentenceDocument>(dir / kDocumentsFile, parse_document);
  dataset.items = read_jsonl<QAItem>(dir / kItemsFile, parse_item);
  dataset.judgments = read_jsonl<Judgment>(dir / kJudgmentsFile, parse_judgment);
  if (fs::exists(dir / kReferencesFile)) {
    dataset.references = read_jsonl<ReferenceScore>(dir / kReferencesFile, parse_reference);
  }
  return dataset;
}

DatasetBundle load_bundle(const fs::path& dir) { return DatasetBundle::create(read_dataset(dir)); }

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw WriteError("cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / kDocumentsFile, to_jsonl(dataset.documents));
  write_text_file(dir / kItemsFile, to_jsonl(dataset.items));
  write_text_file(dir / kJudgmentsFile, to_jsonl(dataset.judgments));
  if (dataset.references) write_text_file(dir / kReferencesFile, to_jsonl(*dataset.references));
}

void save_scores(std::vector<ScoredJudgment> scores, const fs::path& path) {
  std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    return std::tie(a.key.item_id, a.key.annotator, a.method) < std::tie(b.key.item_id, b.key.annotator, b.method);
  });
  write_text_file(path, to_jsonl(scores));
}

std::vector<ReferenceScore> load_references(const fs::path& path) {
  return read_jsonl<ReferenceScore>(path, parse_reference);
}

std::vector<ScoredJudgment> load_scores(const fs::path& path) {
  return read_jsonl<ScoredJudgment>(path, parse_score);
}

Rubric load_rubric(const fs::path& path) {
  json value;
  try {
    value = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, std::string("malformed JSON: ") + e.what());
  }
  Rubric rubric;
  try {
    rubric = rubric_from_json(value);
    rubric.validate();
  } catch (const ParseError& e) {
    throw ParseError(path, 0, e.what());
  } catch (const Error& e) {
    throw ParseError(path, 0, e.what());
  }
  return rubric;
}

void save_rubric(const Rubric& rubric, const fs::path& path) { write_text_file(path, to_json(rubric).dump(2) + "\n"); }

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw WriteError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw WriteError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw WriteError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace ebr::io
