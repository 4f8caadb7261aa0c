#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ihmm::detail {

using Row = std::vector<std::string>;

/// Splits one CSV line on commas, stripping surrounding whitespace and double quotes.
Row split_csv_line(const std::string& line);
/// Reads all non-empty lines of a CSV file.
std::vector<Row> read_csv(const std::filesystem::path& path);
/// Parses a full-string double; returns false on trailing garbage.
bool parse_double(const std::string& s, double& out);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace ihmm::detail
