#pragma once
// Run manifests written next to every artifact-producing command's output.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ebr {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::vector<std::string> command_line;
  std::string run_id;
  std::string backend_id;
  nlohmann::ordered_json config;                  // policy, variant, rubric hash, ...
  std::map<std::string, std::string> input_hashes;  // path -> sha256
  std::string tool_version = kToolVersion;

  /// Hash of everything except run_id; used as the default run id.
  std::string content_id() const;
  nlohmann::ordered_json to_json() const;
};

/// Hashes the dataset files present in `dir` into `manifest.input_hashes`.
void hash_dataset_inputs(RunManifest& manifest, const std::filesystem::path& dir);
void hash_input(RunManifest& manifest, const std::filesystem::path& path);

/// "{output}.manifest.json".
std::filesystem::path manifest_path_for(const std::filesystem::path& output);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& output);

}  // namespace ebr
