#pragma once
// Content-addressed store of backend responses.
//
// Layout: {dir}/{first two hex digits of key}/{key}.json, one CacheEntry per
// file. Writes go through a unique temporary file and an atomic rename, so
// concurrent writers of distinct keys never interfere and duplicate writes of
// one key are idempotent.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace ebr {

struct CacheEntry {
  std::string key;
  std::string model;
  std::string response_text;
  std::string created_at;  // metadata only
};

struct CacheStats {
  std::uint64_t entries = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bytes = 0;
};

/// Key over every request field that can change the response.
std::string cache_key(std::string_view model, std::string_view prompt, double temperature,
                      std::int64_t max_response_tokens);

class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path entry_path(const std::string& key) const;

  /// Counts a hit or a miss.
  std::optional<CacheEntry> lookup(const std::string& key);
  void store(const CacheEntry& entry) const;

  std::uint64_t session_hits() const { return hits_.load(); }
  std::uint64_t session_misses() const { return misses_.load(); }

  /// Adds this session's hit/miss counts to {dir}/stats.json and resets them.
  void persist_session_counts();

 private:
  std::filesystem::path dir_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

/// Entries and bytes on disk plus the hit/miss totals persisted by earlier
/// sessions. Throws Error if `dir` exists but is unreadable.
CacheStats cache_stats(const std::filesystem::path& dir);

/// Same, with the live session's counters added.
CacheStats cache_stats(const ResponseCache& cache);

}  // namespace ebr
