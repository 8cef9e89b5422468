#pragma once
// Dataset validation and the cross-linked, immutable bundle.

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ebr/types.hpp"

namespace ebr {

enum class Severity { warning, error };

struct ValidationIssue {
  Severity severity = Severity::error;
  std::string location;  // e.g. "judgments[3] (item q1, annotator w2)"
  std::string message;

  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  std::size_t error_count() const;
  std::size_t warning_count() const;
  bool accepted() const { return error_count() == 0; }
  /// Accepted with warnings treated as errors.
  bool accepted_strict() const { return issues.empty(); }

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

/// Collects every invariant violation. Never throws.
ValidationReport validate_dataset(const Dataset& dataset);

class ReferenceError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// A dataset whose cross references all resolve and which passed validation.
class DatasetBundle {
 public:
  /// Throws ReferenceError on the first dangling id, ValidationError if the
  /// dataset has validation errors.
  static DatasetBundle create(Dataset dataset);

  const Dataset& data() const { return data_; }
  const std::vector<SentenceDocument>& documents() const { return data_.documents; }
  const std::vector<QAItem>& items() const { return data_.items; }
  const std::vector<Judgment>& judgments() const { return data_.judgments; }
  const std::optional<std::vector<ReferenceScore>>& references() const { return data_.references; }

  const QAItem& item(const std::string& id) const;
  const SentenceDocument& document(const std::string& id) const;
  const SentenceDocument& document_for(const Judgment& judgment) const;
  /// nullptr when the key is unknown.
  const Judgment* find_judgment(const JudgmentKey& key) const;
  const ReferenceScore* find_reference(const JudgmentKey& key) const;

 private:
  explicit DatasetBundle(Dataset dataset);

  Dataset data_;
  std::unordered_map<std::string, std::size_t> documents_by_id_;
  std::unordered_map<std::string, std::size_t> items_by_id_;
  std::map<JudgmentKey, std::size_t> judgments_by_key_;
  std::map<JudgmentKey, std::size_t> references_by_key_;
};

}  // namespace ebr
