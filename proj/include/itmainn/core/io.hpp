#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace itmainn {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

// Writes through a temporary sibling and renames; throws WriteFailure.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file(const std::filesystem::path& path, std::string_view text);

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

// Parses a JSON file; syntax errors become ConfigError with file:line:column.
nlohmann::json load_json_file(const std::filesystem::path& path);
void save_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

// ISO-8601 UTC with millisecond precision, e.g. 2024-05-01T12:30:00.250Z.
// Strings of this form sort lexicographically in time order.
std::string format_utc(std::chrono::system_clock::time_point tp);
std::chrono::system_clock::time_point parse_utc(std::string_view text);
// Compact form for directory names: 20240501T123000Z.
std::string compact_utc(std::chrono::system_clock::time_point tp);

}  // namespace itmainn
