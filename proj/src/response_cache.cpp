#include "ebr/response_cache.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ebr/hashing.hpp"
#include "ebr/types.hpp"

namespace ebr {
namespace fs = std::filesystem;
namespace {

bool is_hex(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

bool is_entry_file(const fs::path& path) {
  const auto stem = path.stem().string();
  const auto parent = path.parent_path().filename().string();
  return path.extension() == ".json" && stem.size() == 64 && is_hex(stem) && parent.size() == 2 &&
         stem.compare(0, 2, parent) == 0;
}

std::string unique_suffix() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return fmt::format(".{:016x}.tmp", rng());
}

void write_atomically(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += unique_suffix();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache file " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::string utc_timestamp() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

struct PersistedCounts {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};

PersistedCounts read_counts(const fs::path& dir) {
  std::ifstream in(dir / "stats.json");
  if (!in) return {};
  try {
    auto value = nlohmann::json::parse(in);
    return {value.value("hits", std::uint64_t{0}), value.value("misses", std::uint64_t{0})};
  } catch (const nlohmann::json::exception&) {
    return {};
  }
}

}  // namespace

std::string cache_key(std::string_view model, std::string_view prompt, double temperature,
                      std::int64_t max_response_tokens) {
  nlohmann::ordered_json fields;
  fields["model"] = model;
  fields["prompt"] = prompt;
  fields["temperature"] = temperature;
  fields["max_tokens"] = max_response_tokens;
  return sha256_hex(fields.dump());
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path ResponseCache::entry_path(const std::string& key) const { return dir_ / key.substr(0, 2) / (key + ".json"); }

std::optional<CacheEntry> ResponseCache::lookup(const std::string& key) {
  std::ifstream in(entry_path(key), std::ios::binary);
  if (in) {
    try {
      auto value = nlohmann::json::parse(in);
      CacheEntry entry{value.at("key").get<std::string>(), value.value("model", std::string()),
                       value.at("response_text").get<std::string>(), value.value("created_at", std::string())};
      if (entry.key == key) {
        ++hits_;
        return entry;
      }
    } catch (const nlohmann::json::exception&) {
      // A corrupt entry is treated as a miss and overwritten on the next store.
    }
  }
  ++misses_;
  return std::nullopt;
}

void ResponseCache::store(const CacheEntry& entry) const {
  nlohmann::ordered_json value;
  value["key"] = entry.key;
  value["model"] = entry.model;
  value["response_text"] = entry.response_text;
  value["created_at"] = entry.created_at.empty() ? utc_timestamp() : entry.created_at;
  write_atomically(entry_path(entry.key), value.dump(2) + "\n");
}

void ResponseCache::persist_session_counts() {
  const std::uint64_t hits = hits_.exchange(0);
  const std::uint64_t misses = misses_.exchange(0);
  if (hits == 0 && misses == 0) return;
  auto counts = read_counts(dir_);
  nlohmann::ordered_json value;
  value["hits"] = counts.hits + hits;
  value["misses"] = counts.misses + misses;
  write_atomically(dir_ / "stats.json", value.dump() + "\n");
}

CacheStats cache_stats(const fs::path& dir) {
  CacheStats stats;
  if (!fs::exists(dir)) return stats;
  if (!fs::is_directory(dir)) throw Error(dir.string() + " is not a directory");
  std::error_code ec;
  fs::directory_iterator top(dir, ec);
  if (ec) throw Error("cannot read cache directory " + dir.string() + ": " + ec.message());
  for (const auto& shard : top) {
    if (!shard.is_directory() || shard.path().filename().string().size() != 2) continue;
    for (const auto& file : fs::directory_iterator(shard.path())) {
      if (file.is_regular_file() && is_entry_file(file.path())) {
        ++stats.entries;
        stats.bytes += file.file_size();
      }
    }
  }
  const auto counts = read_counts(dir);
  stats.hits = counts.hits;
  stats.misses = counts.misses;
  return stats;
}

CacheStats cache_stats(const ResponseCache& cache) {
  auto stats = cache_stats(cache.dir());
  stats.hits += cache.session_hits();
  stats.misses += cache.session_misses();
  return stats;
}

}  // namespace ebr
