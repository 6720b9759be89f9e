#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace odm::util {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const void* data, std::size_t size);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& s);

// Current UTC time as ISO-8601 ("2026-08-10T12:34:56Z").
std::string utc_timestamp();

}  // namespace odm::util
