#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cqed {

struct CsvRow {
    std::size_t line = 0;  // 1-based source line
    std::vector<std::string> cells;
};

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Column index by exact header name, or -1.
    int column(std::string_view name) const;
    /// Parses cell (r, c) as a finite double; ParseError names the line and column.
    double number(std::size_t r, std::size_t c) const;
};

/// Comma-separated text with one header row. Blank lines are skipped; every data
/// row must have as many cells as the header.
CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::string& path);

/// Header name without a trailing "[unit]" suffix, trimmed.
std::string strip_unit(std::string_view name);

/// Shortest text that round-trips the double (17 significant digits).
std::string format_number(double v);

/// Writes `content` to `path`, throwing IoError with the path on failure.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace cqed
