#include "ebr/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace ebr {
namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("base_url must include a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path_prefix = url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

class SemaphoreSlot {
 public:
  explicit SemaphoreSlot(std::counting_semaphore<>& semaphore) : semaphore_(semaphore) { semaphore_.acquire(); }
  ~SemaphoreSlot() { semaphore_.release(); }
  SemaphoreSlot(const SemaphoreSlot&) = delete;
  SemaphoreSlot& operator=(const SemaphoreSlot&) = delete;

 private:
  std::counting_semaphore<>& semaphore_;
};

std::string extract_content(const std::string& body) {
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw MalformedResponse("response body is not JSON");
  }
  try {
    const auto& content = value.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw MalformedResponse("choices[0].message.content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw MalformedResponse("response has no choices[0].message.content");
  }
}

}  // namespace

void BackendConfig::validate() const {
  if (temperature < 0) throw Error("temperature must be non-negative");
  if (concurrency_limit < 1) throw Error("concurrency limit must be at least 1");
  if (max_retries < 0) throw Error("max_retries must be non-negative");
}

ChatClient::ChatClient(BackendConfig config) : config_(std::move(config)), cache_(config_.cache_dir) {
  config_.validate();
  auto url = split_url(config_.base_url);
  scheme_host_port_ = std::move(url.scheme_host_port);
  path_prefix_ = std::move(url.path_prefix);
  in_flight_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(config_.concurrency_limit));
}

std::chrono::milliseconds ChatClient::backoff_delay(int attempt) const {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.0, 0.5);
  const double base = static_cast<double>(config_.backoff_base.count()) * std::ldexp(1.0, attempt - 1);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil(base * (1.0 + jitter(rng)))));
}

std::string ChatClient::complete(const std::string& prompt, CacheMode mode, ResponseCache* audit) {
  const auto key = cache_key(config_.model_name, prompt, config_.temperature, config_.max_response_tokens);
  if (mode == CacheMode::use) {
    if (auto entry = cache_.lookup(key)) return entry->response_text;
  }
  std::string text = send_with_retries(prompt);
  CacheEntry entry{key, config_.model_name, text, {}};
  if (mode == CacheMode::use) cache_.store(entry);
  if (audit) audit->store(entry);
  return text;
}

std::string ChatClient::send_with_retries(const std::string& prompt) {
  const char* api_key = std::getenv(config_.api_key_env.c_str());
  if (!api_key || !*api_key) {
    throw AuthenticationError("API key missing: environment variable " + config_.api_key_env + " is not set");
  }

  nlohmann::ordered_json body;
  body["model"] = config_.model_name;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config_.temperature;
  body["max_tokens"] = config_.max_response_tokens;
  const std::string payload = body.dump();
  const std::string path = path_prefix_ + "/chat/completions";
  const httplib::Headers headers{{"Authorization", std::string("Bearer ") + api_key}};

  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);

  std::string last_reason;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = backoff_delay(attempt);
      if (observer_) observer_(attempt, delay, last_reason);
      std::this_thread::sleep_for(delay);
    }

    httplib::Result result;
    {
      SemaphoreSlot slot(*in_flight_);
      httplib::Client client(scheme_host_port_);
      client.set_connection_timeout(seconds.count(), micros.count());
      client.set_read_timeout(seconds.count(), micros.count());
      client.set_write_timeout(seconds.count(), micros.count());
      ++requests_sent_;
      result = client.Post(path, headers, payload, "application/json");
    }

    if (!result) {
      last_reason = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 200) return extract_content(result->body);
    if (status == 401 || status == 403) {
      throw AuthenticationError("authentication failed (HTTP " + std::to_string(status) + ") using " +
                                config_.api_key_env);
    }
    if (status == 429 || (status >= 500 && status <= 599)) {
      last_reason = "HTTP " + std::to_string(status);
      continue;
    }
    throw BackendError("request rejected with HTTP " + std::to_string(status));
  }
  throw RetriesExhausted("gave up after " + std::to_string(config_.max_retries + 1) + " attempts; last: " + last_reason);
}

LiveBackend::LiveBackend(std::shared_ptr<ChatClient> client, CacheMode mode,
                         std::optional<std::filesystem::path> audit_dir)
    : client_(std::move(client)), mode_(mode) {
  if (audit_dir) audit_.emplace(*audit_dir);
}

std::string LiveBackend::id() const { return "openai:" + client_->config().model_name; }

bool LiveBackend::deterministic() const { return mode_ == CacheMode::use; }

std::string LiveBackend::complete(const BackendRequest& request) {
  return client_->complete(std::string(request.prompt), mode_, audit_ ? &*audit_ : nullptr);
}

}  // namespace ebr
