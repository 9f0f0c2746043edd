#include "klafate/csv.hpp"

#include <fstream>
#include <sstream>

namespace klafate::csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
          if (i + 1 < text.size() && text[i + 1] != ',' && text[i + 1] != '\n' &&
              text[i + 1] != '\r') {
            throw ParseError("unexpected character after closing quote", line, row.size() + 1);
          }
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
    case '"':
      if (field_started) {
        throw ParseError("quote inside unquoted field", line, row.size() + 1);
      }
      quoted = true;
      field_started = true;
      break;
    case ',':
      end_field();
      break;
    case '\r':
      if (i + 1 < text.size() && text[i + 1] == '\n') break;
      throw ParseError("bare carriage return", line, row.size() + 1);
    case '\n':
      end_row();
      ++line;
      break;
    default:
      field += c;
      field_started = true;
    }
  }
  if (quoted) {
    throw ParseError("unterminated quoted field", line, row.size() + 1);
  }
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::string quote(std::string_view field) {
  const bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += quote(row[i]);
  }
  return out;
}

std::string format(const std::vector<Row>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += format_row(r);
    out += '\n';
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace klafate::csv
