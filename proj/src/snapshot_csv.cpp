#include "klafate/snapshot_csv.hpp"

#include <charconv>

#include "klafate/csv.hpp"

namespace klafate::rules {

std::string snapshot_to_csv(const Snapshot& s) {
  std::vector<csv::Row> rows{{"variable", "value"}, {"timestamp", format_number(s.timestamp)}};
  for (const auto& [name, v] : s.values) {
    if (const bool* b = std::get_if<bool>(&v)) {
      rows.push_back({name, *b ? "true" : "false"});
    } else {
      rows.push_back({name, format_number(std::get<double>(v))});
    }
  }
  return csv::format(rows);
}

Snapshot snapshot_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != csv::Row{"variable", "value"}) {
    throw InvalidParameter("snapshot CSV must start with header variable,value");
  }
  Snapshot s;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "snapshot row " + std::to_string(i + 1);
    if (r.size() != 2) throw InvalidParameter(where + ": expected 2 fields");
    const auto& [name, text_value] = std::pair{r[0], r[1]};
    if (name.empty()) throw InvalidParameter(where + ": empty variable name");
    if (text_value == "true" || text_value == "false") {
      if (name == "timestamp") throw InvalidParameter(where + ": timestamp must be a number");
      s.set(name, text_value == "true");
      continue;
    }
    double d = 0.0;
    auto [ptr, ec] = std::from_chars(text_value.data(), text_value.data() + text_value.size(), d);
    if (ec != std::errc() || ptr != text_value.data() + text_value.size()) {
      throw InvalidParameter(where + ": bad value '" + text_value + "'");
    }
    if (name == "timestamp") {
      s.timestamp = d;
    } else {
      s.set(name, d);
    }
  }
  return s;
}

} // namespace klafate::rules
