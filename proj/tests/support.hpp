#pragma once
// Shared fixtures for the unit and acceptance tests.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ebr/dataset.hpp"
#include "ebr/hashing.hpp"
#include "ebr/types.hpp"

namespace ebr::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ebr-test") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline SentenceDocument make_document(const std::string& id, std::size_t sentences) {
  SentenceDocument doc;
  doc.id = id;
  for (std::size_t k = 1; k <= sentences; ++k) doc.sentences.push_back("Sentence number " + std::to_string(k) + " of " + id + ".");
  return doc;
}

inline QAItem make_item(const std::string& id, const std::string& doc_id) {
  QAItem item;
  item.id = id;
  item.doc_id = doc_id;
  item.question_text = "Why did event " + id + " happen?";
  item.anchor_sentence = 1;
  item.answer_text = "Because of the circumstances described for " + id + ".";
  item.answer_system = AnswerSystem::parse("gpt4");
  return item;
}

inline Judgment make_judgment(const std::string& item, const std::string& annotator, LikertLabel label,
                              std::vector<std::int64_t> missing = {}) {
  Judgment j;
  j.item_id = item;
  j.annotator_id = annotator;
  j.label = label;
  j.correctness = true;
  j.explanation = annotator + " on " + item + ": the answer leaves out " + std::to_string(missing.size()) + " relevant sentence(s).";
  j.missing_sentences = std::move(missing);
  return j;
}

inline constexpr std::size_t kSentencesPerDoc = 12;

/// Missing-sentence count drawn so that counts never overlap across labels:
/// complete 0, minor 1-2, major 3-5, all 6-9.
inline std::size_t label_consistent_count(LikertLabel label, std::mt19937& rng) {
  auto pick = [&](int lo, int hi) { return static_cast<std::size_t>(std::uniform_int_distribution<int>(lo, hi)(rng)); };
  switch (label) {
    case LikertLabel::complete: return 0;
    case LikertLabel::missing_minor: return pick(1, 2);
    case LikertLabel::missing_major: return pick(3, 5);
    case LikertLabel::missing_all: return pick(6, 9);
  }
  return 0;
}

inline std::vector<std::int64_t> first_k_sentences(std::size_t k) {
  std::vector<std::int64_t> out;
  for (std::size_t i = 1; i <= k; ++i) out.push_back(static_cast<std::int64_t>(i));
  return out;
}

/// Items q0..q{n-1}, one document each, every annotator judges every item.
/// Labels are random; missing counts are label-consistent.
inline Dataset synthetic_dataset(std::size_t n_items, const std::vector<std::string>& annotators, unsigned seed) {
  std::mt19937 rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n_items; ++i) {
    const std::string doc = "d" + std::to_string(i);
    const std::string item = "q" + std::to_string(i);
    d.documents.push_back(make_document(doc, kSentencesPerDoc));
    d.items.push_back(make_item(item, doc));
    for (const auto& annotator : annotators) {
      const auto label = kAllLabels[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
      d.judgments.push_back(make_judgment(item, annotator, label, first_k_sentences(label_consistent_count(label, rng))));
    }
  }
  return d;
}

/// Fake OpenAI-compatible endpoint. Replies are a pure function of the prompt
/// unless a status script is queued.
class FakeChatServer {
 public:
  using Reply = std::function<std::string(const std::string& prompt)>;

  explicit FakeChatServer(Reply reply = default_reply) : reply_(std::move(reply)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeChatServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  /// Statuses returned (in order) before normal replies resume.
  void script_statuses(std::vector<int> statuses) {
    std::lock_guard lock(mutex_);
    script_ = std::move(statuses);
  }
  void set_latency(std::chrono::milliseconds latency) { latency_ms_ = latency.count(); }

  int requests() const { return requests_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  std::vector<std::string> prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
  }

  static std::string default_reply(const std::string& prompt) {
    const auto digest = sha256_hex(prompt);
    const int score = static_cast<int>(std::stoul(digest.substr(0, 6), nullptr, 16) % 101);
    return "The answer omits some details. Score: " + std::to_string(score);
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    ++requests_;
    std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_.load()));

    int status = 200;
    std::string prompt;
    {
      std::lock_guard lock(mutex_);
      if (!script_.empty()) {
        status = script_.front();
        script_.erase(script_.begin());
      }
      const auto body = nlohmann::json::parse(req.body);
      prompt = body.at("messages").at(0).at("content").get<std::string>();
      prompts_.push_back(prompt);
    }
    if (status != 200) {
      res.status = status;
      res.set_content(R"({"error":"scripted"})", "application/json");
    } else {
      nlohmann::json out;
      out["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", reply_(prompt)}}}}});
      res.set_content(out.dump(), "application/json");
    }
    --in_flight_;
  }

  Reply reply_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<int> script_;
  std::vector<std::string> prompts_;
  std::atomic<int> requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<long long> latency_ms_{0};
};

/// Sets an environment variable for the lifetime of the guard.
class EnvGuard {
 public:
  EnvGuard(std::string name, const std::string& value) : name_(std::move(name)) { ::setenv(name_.c_str(), value.c_str(), 1); }
  ~EnvGuard() { ::unsetenv(name_.c_str()); }

 private:
  std::string name_;
};

}  // namespace ebr::testing
