#pragma once
// On-disk formats. A dataset is a directory of line-delimited JSON files,
// one entity kind per file:
//
//   documents.jsonl   {id, split, sentences:[string]}
//   items.jsonl       {id, doc_id, question, anchor, answer, system}
//   judgments.jsonl   {item_id, annotator, label, correct, explanation, missing_sentences:[int]}
//   references.jsonl  {item_id, annotator, expert_scores:[int]}        (optional)
//   scores.jsonl      {item_id, annotator, method, backend, run_id, score, raw_response?}
//
// Missing required fields are parse errors; unknown extra fields are ignored.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ebr/dataset.hpp"
#include "ebr/types.hpp"

namespace ebr::io {

namespace fs = std::filesystem;

inline constexpr const char* kDocumentsFile = "documents.jsonl";
inline constexpr const char* kItemsFile = "items.jsonl";
inline constexpr const char* kJudgmentsFile = "judgments.jsonl";
inline constexpr const char* kReferencesFile = "references.jsonl";

/// Malformed input. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(fs::path file, std::size_t line, const std::string& message);
  const fs::path& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  fs::path file_;
  std::size_t line_;
};

class WriteError : public Error {
 public:
  using Error::Error;
};

/// Parses the directory without cross-checking it. Throws ParseError.
Dataset read_dataset(const fs::path& dir);

/// read_dataset + reference resolution + validation. Throws ParseError,
/// ReferenceError or ValidationError.
DatasetBundle load_bundle(const fs::path& dir);

/// Writes every entity file of `dataset` into `dir` (created if needed).
/// references.jsonl is written only when references are present.
void save_dataset(const Dataset& dataset, const fs::path& dir);

/// One record per line, sorted by (item id, annotator id, method).
void save_scores(std::vector<ScoredJudgment> scores, const fs::path& path);
std::vector<ScoredJudgment> load_scores(const fs::path& path);
/// A standalone file in the references.jsonl format.
std::vector<ReferenceScore> load_references(const fs::path& path);

Rubric load_rubric(const fs::path& path);
void save_rubric(const Rubric& rubric, const fs::path& path);

// Record-level conversions, exposed for tests and the CLI.
nlohmann::ordered_json to_json(const SentenceDocument& document);
nlohmann::ordered_json to_json(const QAItem& item);
nlohmann::ordered_json to_json(const Judgment& judgment);
nlohmann::ordered_json to_json(const ReferenceScore& reference);
nlohmann::ordered_json to_json(const ScoredJudgment& score);
nlohmann::ordered_json to_json(const Rubric& rubric);
Rubric rubric_from_json(const nlohmann::json& json);

/// Numbers that are integral are emitted as JSON integers.
nlohmann::ordered_json number_json(double value);

/// Writes through a temporary file and rename; readers never see a partial file.
void write_text_file(const fs::path& path, const std::string& content);
std::string read_text_file(const fs::path& path);

}  // namespace ebr::io
