#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace probe::csv {

/// RFC 4180 table: first record is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, if present.
  std::optional<std::size_t> column(std::string_view name) const;
};

/// Parses comma-separated text. Quoted fields may contain commas, doubled
/// quotes and line breaks. Short rows are padded with empty fields; long rows
/// raise SchemaError.
Table parse(std::string_view text);

Table read_file(const std::string& path);

/// Appends one CSV record (with trailing "\n") to `out`.
void append_row(std::string& out, std::span<const std::string> fields);

std::string format(const Table& table);

}  // namespace probe::csv
