#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace lakewatch {

/// Write to a sibling temp file, fsync, then rename over `path`, so readers
/// see either the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Whole-file read; nullopt if the file does not exist or cannot be opened.
std::optional<std::string> read_file(const std::filesystem::path& path);

/// Appends one line and fsyncs before returning.
void append_line_durable(const std::filesystem::path& path, std::string_view line);

/// Maps an identifier onto [A-Za-z0-9._-], replacing anything else with '_'.
std::string safe_file_name(std::string_view id);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

}  // namespace lakewatch
