#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace disrank::tsv {

/// Escapes tab, newline, carriage return and backslash as \t \n \r \\.
std::string escape(std::string_view field);

/// Inverse of escape(). Throws std::invalid_argument on a dangling or
/// unknown escape sequence.
std::string unescape(std::string_view field);

/// Splits on raw tabs and unescapes each field.
std::vector<std::string> split_row(std::string_view line);

struct Row {
    std::size_t line = 0; ///< 1-based; the header is line 1
    std::vector<std::string> fields;
};

/// Reads a whole TSV file, checks the header against `expected_header`, and
/// returns the data rows. Blank lines are skipped, CRLF endings accepted.
/// Column-count mismatches raise ParseError naming the line.
std::vector<Row> read_table(const std::filesystem::path& path,
                            const std::vector<std::string_view>& expected_header);

/// Fixed six-decimal rendering used by every TSV writer.
std::string format_real(double value);

long long parse_integer(const std::string& text, const std::filesystem::path& file,
                        std::size_t line, std::string_view column);
double parse_real(const std::string& text, const std::filesystem::path& file,
                  std::size_t line, std::string_view column);

/// Writes `content` to `path` atomically enough for our purposes (truncate + write).
void write_file(const std::filesystem::path& path, std::string_view content);

} // namespace disrank::tsv
