#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace probe {

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Current UTC instant as ISO-8601 (seconds precision). Honors SOURCE_DATE_EPOCH
/// so that reproducible runs can pin the timestamp.
std::string utc_timestamp();

}  // namespace probe
