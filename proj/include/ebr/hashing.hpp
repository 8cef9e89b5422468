#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ebr {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes. Throws Error if unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace ebr
