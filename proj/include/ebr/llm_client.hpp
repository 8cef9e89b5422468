#pragma once
// Client for an OpenAI-compatible chat-completions endpoint.
//
// One user-role message per request, POSTed to {base_url}/chat/completions.
// Transient failures (HTTP 429, 5xx, connection errors and timeouts) are
// retried with exponential backoff and jitter; every response is stored in a
// content-addressed cache so repeated experiments issue no requests.

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "ebr/rescaling.hpp"
#include "ebr/response_cache.hpp"

namespace ebr {

struct BackendConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-4-0613";
  double temperature = 0.0;
  std::int64_t max_response_tokens = 512;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 5;
  std::size_t concurrency_limit = 4;
  std::filesystem::path cache_dir = ".ebr-cache";
  std::string api_key_env = "OPENAI_API_KEY";
  /// First retry waits about this long; each further retry doubles it.
  std::chrono::milliseconds backoff_base{1'000};

  /// Throws Error on a negative temperature or a zero concurrency limit.
  void validate() const;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

/// 401/403 from the server, or no API key in the environment.
class AuthenticationError : public BackendError {
 public:
  using BackendError::BackendError;
};

class RetriesExhausted : public BackendError {
 public:
  using BackendError::BackendError;
};

class MalformedResponse : public BackendError {
 public:
  using BackendError::BackendError;
};

enum class CacheMode {
  use,     // read and write the shared cache
  bypass,  // always send; write the answer to the audit cache if one is set
};

/// Called before sleeping ahead of retry number `attempt` (1-based).
using RetryObserver = std::function<void(int attempt, std::chrono::milliseconds delay, const std::string& reason)>;

class ChatClient {
 public:
  explicit ChatClient(BackendConfig config);

  const BackendConfig& config() const { return config_; }
  ResponseCache& cache() { return cache_; }

  void set_retry_observer(RetryObserver observer) { observer_ = std::move(observer); }

  /// Response text for `prompt`. With CacheMode::bypass the shared cache is
  /// neither read nor written; `audit` (if given) receives the response.
  std::string complete(const std::string& prompt, CacheMode mode = CacheMode::use, ResponseCache* audit = nullptr);

  /// Delay before retry `attempt` (1-based): base * 2^(attempt-1) * (1 + u),
  /// u uniform in [0, 0.5). Strictly increasing in `attempt`.
  std::chrono::milliseconds backoff_delay(int attempt) const;

  /// Requests actually sent over the network this session (including retries).
  std::uint64_t requests_sent() const { return requests_sent_.load(); }

 private:
  std::string send_with_retries(const std::string& prompt);

  BackendConfig config_;
  ResponseCache cache_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
  RetryObserver observer_;
  std::atomic<std::uint64_t> requests_sent_{0};
};

/// The live ScoringBackend.
class LiveBackend final : public ScoringBackend {
 public:
  explicit LiveBackend(std::shared_ptr<ChatClient> client, CacheMode mode = CacheMode::use,
                       std::optional<std::filesystem::path> audit_dir = std::nullopt);

  std::string id() const override;
  bool deterministic() const override;
  std::string complete(const BackendRequest& request) override;

  ChatClient& client() { return *client_; }

 private:
  std::shared_ptr<ChatClient> client_;
  CacheMode mode_;
  std::optional<ResponseCache> audit_;
};

}  // namespace ebr
