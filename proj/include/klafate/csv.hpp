#pragma once

// Minimal RFC-4180 reader/writer: comma separated, double-quote quoting,
// LF or CRLF input, LF output.

#include <string>
#include <string_view>
#include <vector>

#include "klafate/error.hpp"

namespace klafate::csv {

using Row = std::vector<std::string>;

class ParseError : public Error {
public:
  ParseError(const std::string& message, std::size_t row, std::size_t column)
      : Error(message + " (row " + std::to_string(row) + ", column " + std::to_string(column) +
              ")"),
        row_(row), column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::size_t column_;
};

// Rows are 1-based in error messages. A trailing newline does not produce an
// empty final row.
std::vector<Row> parse(std::string_view text);

std::string quote(std::string_view field);
std::string format_row(const Row& row);
std::string format(const std::vector<Row>& rows);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace klafate::csv
