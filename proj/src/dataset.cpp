#include "ebr/dataset.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace ebr {
namespace {

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; });
}

class IssueSink {
 public:
  void error(std::string location, std::string message) {
    report_.issues.push_back({Severity::error, std::move(location), std::move(message)});
  }
  void warning(std::string location, std::string message) {
    report_.issues.push_back({Severity::warning, std::move(location), std::move(message)});
  }
  ValidationReport take() { return std::move(report_); }

 private:
  ValidationReport report_;
};

std::string indexed(std::string_view kind, std::size_t i) {
  return std::string(kind) + "[" + std::to_string(i) + "]";
}

std::string summarize(const ValidationReport& report) {
  std::string text = "dataset has " + std::to_string(report.error_count()) + " validation error(s)";
  for (const auto& issue : report.issues) {
    if (issue.severity == Severity::error) {
      text += "; first: " + issue.location + ": " + issue.message;
      break;
    }
  }
  return text;
}

}  // namespace

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(),
                                                [](const auto& i) { return i.severity == Severity::error; }));
}

std::size_t ValidationReport::warning_count() const { return issues.size() - error_count(); }

ValidationReport validate_dataset(const Dataset& dataset) {
  IssueSink sink;

  std::unordered_map<std::string, const SentenceDocument*> documents;
  for (std::size_t i = 0; i < dataset.documents.size(); ++i) {
    const auto& doc = dataset.documents[i];
    const auto where = indexed("documents", i) + " (" + doc.id + ")";
    if (doc.id.empty()) sink.error(where, "empty document id");
    if (!documents.emplace(doc.id, &doc).second) sink.error(where, "duplicate document id '" + doc.id + "'");
    if (doc.sentences.empty()) sink.error(where, "document has no sentences");
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      if (is_blank(doc.sentences[s])) sink.error(where, "sentence " + std::to_string(s + 1) + " is blank");
    }
  }

  std::unordered_map<std::string, const SentenceDocument*> document_of_item;
  std::unordered_set<std::string> item_ids;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    const auto& item = dataset.items[i];
    const auto where = indexed("items", i) + " (" + item.id + ")";
    if (item.id.empty()) sink.error(where, "empty item id");
    if (!item_ids.insert(item.id).second) sink.error(where, "duplicate item id '" + item.id + "'");
    if (is_blank(item.answer_text)) sink.error(where, "answer text is empty");
    auto doc = documents.find(item.doc_id);
    if (doc == documents.end()) {
      sink.error(where, "unknown document id '" + item.doc_id + "'");
      continue;
    }
    document_of_item.emplace(item.id, doc->second);
    if (!doc->second->contains_sentence(item.anchor_sentence)) {
      sink.error(where, "anchor sentence " + std::to_string(item.anchor_sentence) + " out of bounds (document has " +
                            std::to_string(doc->second->size()) + " sentences)");
    }
  }

  if (dataset.judgments.empty()) sink.warning("judgments", "no judgments");

  std::set<JudgmentKey> judgment_keys;
  for (std::size_t i = 0; i < dataset.judgments.size(); ++i) {
    const auto& judgment = dataset.judgments[i];
    const auto where = indexed("judgments", i) + " " + to_string(judgment.key());
    if (judgment.annotator_id.empty()) sink.error(where, "empty annotator id");
    if (!judgment_keys.insert(judgment.key()).second) sink.error(where, "duplicate judgment");
    if (judgment.label == LikertLabel::complete && !judgment.missing_sentences.empty()) {
      sink.warning(where, "label complete but missing sentences listed");
    }
    std::set<std::int64_t> seen;
    for (auto index : judgment.missing_sentences) {
      if (!seen.insert(index).second) sink.warning(where, "missing sentence " + std::to_string(index) + " listed twice");
    }
    auto doc = document_of_item.find(judgment.item_id);
    if (doc == document_of_item.end()) {
      if (!item_ids.contains(judgment.item_id)) sink.error(where, "unknown item id '" + judgment.item_id + "'");
      continue;
    }
    for (auto index : seen) {
      if (!doc->second->contains_sentence(index)) {
        sink.error(where, "missing sentence index " + std::to_string(index) + " out of bounds (document has " +
                              std::to_string(doc->second->size()) + " sentences)");
      }
    }
  }

  if (dataset.references) {
    std::set<JudgmentKey> reference_keys;
    for (std::size_t i = 0; i < dataset.references->size(); ++i) {
      const auto& reference = (*dataset.references)[i];
      const auto where = indexed("references", i) + " " + to_string(reference.key);
      if (!reference_keys.insert(reference.key).second) sink.error(where, "duplicate reference");
      if (!judgment_keys.contains(reference.key)) sink.error(where, "reference to unknown judgment");
      if (reference.expert_scores.empty()) sink.error(where, "no expert scores");
      for (auto score : reference.expert_scores) {
        if (score < 0 || score > 100) sink.error(where, "expert score " + std::to_string(score) + " outside 0..100");
      }
    }
  }

  return sink.take();
}

ValidationError::ValidationError(ValidationReport report)
    : Error(summarize(report)), report_(std::move(report)) {}

DatasetBundle::DatasetBundle(Dataset dataset) : data_(std::move(dataset)) {}

DatasetBundle DatasetBundle::create(Dataset dataset) {
  DatasetBundle bundle(std::move(dataset));
  const auto& data = bundle.data_;
  for (std::size_t i = 0; i < data.documents.size(); ++i) bundle.documents_by_id_.emplace(data.documents[i].id, i);
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    if (!bundle.documents_by_id_.contains(data.items[i].doc_id)) {
      throw ReferenceError("item '" + data.items[i].id + "' references unknown document id '" + data.items[i].doc_id + "'");
    }
    bundle.items_by_id_.emplace(data.items[i].id, i);
  }
  for (std::size_t i = 0; i < data.judgments.size(); ++i) {
    const auto& judgment = data.judgments[i];
    if (!bundle.items_by_id_.contains(judgment.item_id)) {
      throw ReferenceError("judgment by annotator '" + judgment.annotator_id + "' references unknown item id '" +
                           judgment.item_id + "'");
    }
    bundle.judgments_by_key_.emplace(judgment.key(), i);
  }
  if (data.references) {
    for (std::size_t i = 0; i < data.references->size(); ++i) {
      const auto& key = (*data.references)[i].key;
      if (!bundle.judgments_by_key_.contains(key)) {
        throw ReferenceError("reference score references unknown judgment " + to_string(key));
      }
      bundle.references_by_key_.emplace(key, i);
    }
  }
  auto report = validate_dataset(data);
  if (!report.accepted()) throw ValidationError(std::move(report));
  return bundle;
}

const QAItem& DatasetBundle::item(const std::string& id) const {
  auto it = items_by_id_.find(id);
  if (it == items_by_id_.end()) throw ReferenceError("unknown item id '" + id + "'");
  return data_.items[it->second];
}

const SentenceDocument& DatasetBundle::document(const std::string& id) const {
  auto it = documents_by_id_.find(id);
  if (it == documents_by_id_.end()) throw ReferenceError("unknown document id '" + id + "'");
  return data_.documents[it->second];
}

const SentenceDocument& DatasetBundle::document_for(const Judgment& judgment) const {
  return document(item(judgment.item_id).doc_id);
}

const Judgment* DatasetBundle::find_judgment(const JudgmentKey& key) const {
  auto it = judgments_by_key_.find(key);
  return it == judgments_by_key_.end() ? nullptr : &data_.judgments[it->second];
}

const ReferenceScore* DatasetBundle::find_reference(const JudgmentKey& key) const {
  if (!data_.references) return nullptr;
  auto it = references_by_key_.find(key);
  return it == references_by_key_.end() ? nullptr : &(*data_.references)[it->second];
}

}  // namespace ebr
