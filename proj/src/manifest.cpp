#include "ebr/manifest.hpp"

#include "ebr/hashing.hpp"
#include "ebr/io.hpp"

namespace ebr {

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json out;
  out["tool_version"] = tool_version;
  out["command_line"] = command_line;
  out["run_id"] = run_id;
  out["backend"] = backend_id;
  out["config"] = config;
  out["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [path, hash] : input_hashes) out["inputs"][path] = hash;
  return out;
}

std::string RunManifest::content_id() const {
  auto json = to_json();
  json.erase("run_id");
  return sha256_hex(json.dump()).substr(0, 16);
}

void hash_input(RunManifest& manifest, const std::filesystem::path& path) {
  manifest.input_hashes[path.generic_string()] = sha256_file(path);
}

void hash_dataset_inputs(RunManifest& manifest, const std::filesystem::path& dir) {
  for (const char* name : {io::kDocumentsFile, io::kItemsFile, io::kJudgmentsFile, io::kReferencesFile}) {
    if (std::filesystem::exists(dir / name)) hash_input(manifest, dir / name);
  }
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  auto path = output;
  path += ".manifest.json";
  return path;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& output) {
  io::write_text_file(manifest_path_for(output), manifest.to_json().dump(2) + "\n");
}

}  // namespace ebr
