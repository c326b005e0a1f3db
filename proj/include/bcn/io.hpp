#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bcn {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file and renames on success, so a failed write
// never leaves a partial artifact behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& data);

// Files in `dir` with the given extension, sorted by filename.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              std::string_view extension);

// FNV-1a over the bytes of `s`; stable across platforms.
std::uint64_t stable_hash(std::string_view s);

}  // namespace bcn
