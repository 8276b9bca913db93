#include "disrank/tsv.hpp"

#include "disrank/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace disrank {

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : Error(fmt::format("{}:{}: {}", file, line, what)), m_line(line) {}

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : Error(fmt::format("{} (at byte offset {})", what, offset)), m_offset(offset) {}

namespace tsv {

std::string escape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (char c : field) {
        switch (c) {
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\\': out += "\\\\"; break;
        default: out += c;
        }
    }
    return out;
}

std::string unescape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (field[i] != '\\') {
            out += field[i];
            continue;
        }
        if (i + 1 == field.size()) {
            throw std::invalid_argument("dangling backslash");
        }
        switch (field[++i]) {
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        case '\\': out += '\\'; break;
        default: throw std::invalid_argument(fmt::format("unknown escape \\{}", field[i]));
        }
    }
    return out;
}

std::vector<std::string> split_row(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        fields.push_back(unescape(line.substr(start, tab - start)));
        if (tab == std::string_view::npos) {
            break;
        }
        start = tab + 1;
    }
    return fields;
}

std::vector<Row> read_table(const std::filesystem::path& path,
                            const std::vector<std::string_view>& expected_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open {}", path.string()));
    }
    const std::string file = path.string();
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        try {
            fields = split_row(line);
        } catch (const std::invalid_argument& e) {
            throw ParseError(file, line_no, e.what());
        }
        if (!seen_header) {
            seen_header = true;
            if (fields.size() != expected_header.size()) {
                throw ParseError(file, line_no,
                                 fmt::format("header has {} columns, expected {}", fields.size(),
                                             expected_header.size()));
            }
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] != expected_header[i]) {
                    throw ParseError(file, line_no,
                                     fmt::format("unknown column '{}' (expected '{}')", fields[i],
                                                 expected_header[i]));
                }
            }
            continue;
        }
        if (fields.size() != expected_header.size()) {
            throw ParseError(file, line_no,
                             fmt::format("expected {} columns, found {}", expected_header.size(),
                                         fields.size()));
        }
        rows.push_back(Row{line_no, std::move(fields)});
    }
    if (!seen_header) {
        throw ParseError(file, 1, "missing header row");
    }
    return rows;
}

std::string format_real(double value) {
    return fmt::format("{:.6f}", value);
}

long long parse_integer(const std::string& text, const std::filesystem::path& file,
                        std::size_t line, std::string_view column) {
    long long value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw ParseError(file.string(), line,
                         fmt::format("column {}: '{}' is not an integer", column, text));
    }
    return value;
}

double parse_real(const std::string& text, const std::filesystem::path& file, std::size_t line,
                  std::string_view column) {
    // from_chars for double is missing from older libstdc++; use strtod with
    // a full-consumption check instead.
    if (text.empty()) {
        throw ParseError(file.string(), line, fmt::format("column {}: empty number", column));
    }
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(value)) {
        throw ParseError(file.string(), line,
                         fmt::format("column {}: '{}' is not a finite number", column, text));
    }
    return value;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(fmt::format("cannot open {} for writing", path.string()));
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw IoError(fmt::format("write to {} failed", path.string()));
    }
}

} // namespace tsv
} // namespace disrank
