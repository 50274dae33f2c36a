#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace tbench {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written output. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Returns a unique temporary path next to `path`.
std::filesystem::path temp_sibling(const std::filesystem::path& path);

}  // namespace tbench
