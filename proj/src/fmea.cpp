#include "klafate/fmea.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "klafate/csv.hpp"
#include "klafate/exclusivity.hpp"

namespace klafate::fmea {

namespace fs = std::filesystem;

LoadError::LoadError(const std::string& file, std::size_t row, const std::string& message)
    : Error(file + (row ? " row " + std::to_string(row) : std::string()) + ": " + message),
      file_(file), row_(row) {}

std::string_view section_name(SettingSection s) {
  switch (s) {
  case SettingSection::Team: return "team";
  case SettingSection::System: return "system";
  case SettingSection::Component: return "component";
  case SettingSection::Variable: return "variable";
  case SettingSection::Model: return "model";
  }
  return "?";
}

namespace {

constexpr std::string_view kSettingsHeader[] = {"section", "name", "value", "unit"};
constexpr std::string_view kWeightHeader[] = {"criterion", "formula", "defs"};
constexpr std::string_view kSystemHeader[] = {"process", "subprocess", "fm_id", "label",
                                              "effect",  "rule",       "defs"};
constexpr std::string_view kComponentHeader[] = {"fm_id", "system_fm", "cause",
                                                 "recommendation", "rule", "defs"};
constexpr std::string_view kProfilesHeader[] = {"name", "e_g", "e_m", "waste", "production"};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(';', start);
    if (end == std::string_view::npos) end = s.size();
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += "; ";
    out += items[i];
  }
  return out;
}

// Reads a table, checks the fixed header prefix and returns data rows with
// their 1-based file row numbers. Extra trailing columns are returned in
// `extra_columns`.
struct Table {
  std::string file;
  std::vector<std::string> extra_columns;
  std::vector<std::pair<std::size_t, csv::Row>> rows;
};

Table read_table(const fs::path& dir, const std::string& file,
                 std::span<const std::string_view> header, std::size_t required_columns) {
  const fs::path path = dir / file;
  if (!fs::exists(path)) throw LoadError(file, 0, "missing file");
  std::vector<csv::Row> raw;
  try {
    raw = csv::parse(csv::read_file(path.string()));
  } catch (const csv::ParseError& e) {
    throw LoadError(file, e.row(), e.what());
  }
  if (raw.empty()) throw LoadError(file, 1, "missing header row");
  const auto& head = raw.front();
  if (head.size() < required_columns) {
    throw LoadError(file, 1, "header has " + std::to_string(head.size()) +
                                 " columns, expected at least " +
                                 std::to_string(required_columns));
  }
  Table t;
  t.file = file;
  std::size_t fixed = std::min(header.size(), head.size());
  for (std::size_t i = 0; i < fixed; ++i) {
    if (head[i] != header[i]) {
      if (i >= required_columns) {
        // Optional fixed column absent; what follows is extra.
        fixed = i;
        break;
      }
      throw LoadError(file, 1,
                      "column " + std::to_string(i + 1) + " must be '" + std::string(header[i]) +
                          "', found '" + head[i] + "'");
    }
  }
  t.extra_columns.assign(head.begin() + static_cast<std::ptrdiff_t>(fixed), head.end());
  for (std::size_t r = 1; r < raw.size(); ++r) {
    auto row = raw[r];
    if (std::all_of(row.begin(), row.end(), [](const std::string& f) { return f.empty(); })) {
      continue;
    }
    if (row.size() != head.size()) {
      throw LoadError(file, r + 1, "expected " + std::to_string(head.size()) +
                                       " fields, found " + std::to_string(row.size()));
    }
    // Normalise to the full fixed width so optional columns read as empty.
    if (fixed < header.size()) {
      row.insert(row.begin() + static_cast<std::ptrdiff_t>(fixed), header.size() - fixed, "");
    }
    t.rows.emplace_back(r + 1, std::move(row));
  }
  return t;
}

double parse_number(const std::string& text, const std::string& file, std::size_t row,
                    const std::string& what) {
  const std::string s = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw LoadError(file, row, what + " is not a finite number: '" + text + "'");
  }
  return v;
}

RuleCell build_rule(const std::string& rule_text, const std::string& defs_text,
                    const rules::SymbolTable& symbols, rules::ValueKind want,
                    const std::string& file, std::size_t row) {
  RuleCell cell;
  try {
    cell.defs = rules::parse_defs(defs_text);
    cell.rule = rules::parse_rule(rule_text);
    auto typed = rules::typecheck(rules::expand_aliases(cell.rule, cell.defs), symbols);
    if (want != rules::ValueKind::Any && typed.kind != want && typed.kind != rules::ValueKind::Any) {
      throw rules::TypeMismatch(std::string("rule must be ") +
                                    (want == rules::ValueKind::Boolean ? "boolean" : "real"),
                                cell.rule->pos);
    }
    cell.expanded = typed.expr;
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(file, row, e.what());
  }
  return cell;
}

std::string render_number(const std::string& raw) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec == std::errc() && ptr == raw.data() + raw.size()) return rules::format_number(v);
  return raw;
}

void load_settings(const fs::path& dir, Workbook& wb) {
  const auto table = read_table(dir, "settings.csv", kSettingsHeader, 4);
  std::set<std::string> names;
  for (const auto& [row, fields] : table.rows) {
    SettingRow s;
    const std::string section = trim(fields[0]);
    s.name = trim(fields[1]);
    s.value = trim(fields[2]);
    s.unit = trim(fields[3]);
    if (s.name.empty()) throw LoadError(table.file, row, "empty name");
    if (section == "team") s.section = SettingSection::Team;
    else if (section == "system") s.section = SettingSection::System;
    else if (section == "component") s.section = SettingSection::Component;
    else if (section == "variable") s.section = SettingSection::Variable;
    else if (section == "model") s.section = SettingSection::Model;
    else throw LoadError(table.file, row, "unknown section '" + section + "'");

    if (s.section != SettingSection::Model && !names.insert(s.name).second) {
      throw LoadError(table.file, row, "duplicate name '" + s.name + "'");
    }
    switch (s.section) {
    case SettingSection::Team:
    case SettingSection::System:
    case SettingSection::Component: {
      rules::Threshold t{parse_number(s.value, table.file, row, "threshold value"), s.unit};
      auto& target = s.section == SettingSection::Team     ? wb.team
                     : s.section == SettingSection::System ? wb.system
                                                           : wb.component;
      target.emplace(s.name, t);
      break;
    }
    case SettingSection::Variable:
      if (s.value == "real") wb.variables.emplace(s.name, rules::ValueKind::Real);
      else if (s.value == "bool") wb.variables.emplace(s.name, rules::ValueKind::Boolean);
      else throw LoadError(table.file, row, "variable kind must be 'real' or 'bool'");
      break;
    case SettingSection::Model: {
      const double v = parse_number(s.value, table.file, row, s.name);
      if (s.name == "F") {
        if (v != std::floor(v) || v < 1 || v > 15) {
          throw LoadError(table.file, row, "F must be an integer in [1,15]");
        }
        wb.model.approximation_exponent = static_cast<int>(v);
      } else if (s.name == "MEMBER_WEIGHT_DECIMALS") {
        if (v != std::floor(v) || v < 0 || v > 12) {
          throw LoadError(table.file, row, "MEMBER_WEIGHT_DECIMALS must be an integer in [0,12]");
        }
        wb.model.member_weight_decimals = static_cast<int>(v);
      } else if (s.name == "KV_THRESHOLD") {
        if (v <= 0) throw LoadError(table.file, row, "KV_THRESHOLD must be positive");
        wb.model.kv_threshold = v;
      } else {
        throw LoadError(table.file, row, "unknown model setting '" + s.name + "'");
      }
      break;
    }
    }
    wb.settings.push_back(std::move(s));
  }
}

void load_weight_update(const fs::path& dir, Workbook& wb) {
  const auto table = read_table(dir, "weight_update.csv", kWeightHeader, 2);
  if (!table.extra_columns.empty()) {
    throw LoadError(table.file, 1, "unexpected column '" + table.extra_columns.front() + "'");
  }
  const auto symbols = wb.team_symbols();
  for (const auto& [row, fields] : table.rows) {
    WeightCriterion c;
    c.name = trim(fields[0]);
    if (c.name.empty()) throw LoadError(table.file, row, "empty criterion name");
    for (const auto& other : wb.weight_update) {
      if (other.name == c.name) throw LoadError(table.file, row, "duplicate criterion " + c.name);
    }
    c.formula = build_rule(fields[1], fields[2], symbols, rules::ValueKind::Real, table.file, row);
    wb.weight_update.push_back(std::move(c));
  }
  for (auto required : kRequiredCriteria) {
    if (std::none_of(wb.weight_update.begin(), wb.weight_update.end(),
                     [&](const WeightCriterion& c) { return c.name == required; })) {
      throw LoadError(table.file, 0, "missing criterion " + std::string(required));
    }
  }
}

void load_system(const fs::path& dir, Workbook& wb) {
  auto table = read_table(dir, "system.csv", kSystemHeader, 7);
  wb.system_extra_columns = table.extra_columns;
  const auto symbols = wb.system_symbols();
  for (auto& [row, fields] : table.rows) {
    KnowledgeTuple t;
    t.process = trim(fields[0]);
    t.subprocess = trim(fields[1]);
    t.fm.id = trim(fields[2]);
    t.fm.label = trim(fields[3]);
    t.fm.description = t.fm.label;
    t.effects = split_list(fields[4]);
    if (t.fm.id.empty()) throw LoadError(table.file, row, "empty fm_id");
    for (const auto& other : wb.system_fms) {
      if (other.fm.id == t.fm.id) {
        throw LoadError(table.file, row,
                        "duplicate system FM '" + t.fm.id + "' (one rule per knowledge tuple)");
      }
    }
    if (trim(fields[5]).empty()) throw LoadError(table.file, row, "system FM needs a rule");
    t.rule = build_rule(fields[5], fields[6], symbols, rules::ValueKind::Boolean, table.file, row);
    t.weight_ref = t.fm.id;
    wb.system_extra.emplace_back(fields.begin() + 7, fields.end());
    wb.system_fms.push_back(std::move(t));
  }
  if (wb.system_fms.empty()) throw LoadError(table.file, 0, "no system failure modes");
}

void load_component(const fs::path& dir, Workbook& wb) {
  auto table = read_table(dir, "component.csv", kComponentHeader, 6);
  wb.component_extra_columns = table.extra_columns;
  const auto symbols = wb.component_symbols();
  for (auto& [row, fields] : table.rows) {
    ComponentRow r;
    r.fm_id = trim(fields[0]);
    r.system_fm = trim(fields[1]);
    r.cause = trim(fields[2]);
    r.recommendation = trim(fields[3]);
    r.extra.assign(fields.begin() + 6, fields.end());
    if (r.fm_id.empty()) throw LoadError(table.file, row, "empty fm_id");
    if (std::none_of(wb.system_fms.begin(), wb.system_fms.end(),
                     [&](const KnowledgeTuple& t) { return t.fm.id == r.system_fm; })) {
      throw LoadError(table.file, row,
                      "component FM '" + r.fm_id + "' links to unknown system FM '" +
                          r.system_fm + "'");
    }
    auto existing = std::find_if(wb.component_fms.begin(), wb.component_fms.end(),
                                 [&](const ComponentFm& c) { return c.tuple.fm.id == r.fm_id; });
    const bool has_rule = !trim(fields[4]).empty();
    if (has_rule) {
      r.rule = build_rule(fields[4], fields[5], symbols, rules::ValueKind::Boolean, table.file,
                          row);
    } else if (!trim(fields[5]).empty()) {
      throw LoadError(table.file, row, "defs given without a rule");
    }
    if (existing == wb.component_fms.end()) {
      if (!has_rule) {
        throw LoadError(table.file, row, "first row of component FM '" + r.fm_id +
                                             "' needs a rule");
      }
      ComponentFm c;
      c.tuple.process = "";
      c.tuple.fm = FailureMode{r.fm_id, r.fm_id, r.cause};
      c.tuple.rule = *r.rule;
      c.tuple.weight_ref = r.system_fm;
      c.system_fm = r.system_fm;
      wb.component_fms.push_back(std::move(c));
      existing = std::prev(wb.component_fms.end());
    } else {
      if (existing->system_fm != r.system_fm) {
        throw LoadError(table.file, row, "component FM '" + r.fm_id +
                                             "' already belongs to system FM '" +
                                             existing->system_fm + "'");
      }
      if (has_rule && !rules::structurally_equal(*r.rule->expanded,
                                                 *existing->tuple.rule.expanded)) {
        throw LoadError(table.file, row,
                        "component FM '" + r.fm_id + "' has conflicting rules; leave the rule "
                                                     "cell empty on continuation rows");
      }
    }
    existing->tuple.causes.push_back(r.cause);
    existing->tuple.recommendations.push_back(r.recommendation);
    existing->rows.push_back(wb.component_rows.size());
    wb.component_rows.push_back(std::move(r));
  }
  for (auto& sys : wb.system_fms) {
    for (const auto& r : wb.component_rows) {
      if (r.system_fm == sys.fm.id) {
        sys.causes.push_back(r.cause);
        sys.recommendations.push_back(r.recommendation);
      }
    }
  }
}

void load_profiles(const fs::path& dir, Workbook& wb) {
  const auto table = read_table(dir, "profiles.csv", kProfilesHeader, 5);
  for (const auto& [row, fields] : table.rows) {
    MemberProfile p;
    p.name = trim(fields[0]);
    p.e_g = parse_number(fields[1], table.file, row, "e_g");
    p.e_m = parse_number(fields[2], table.file, row, "e_m");
    p.waste = parse_number(fields[3], table.file, row, "waste");
    p.production = parse_number(fields[4], table.file, row, "production");
    if (p.name.empty()) throw LoadError(table.file, row, "empty member name");
    if (p.e_g < 0 || p.e_m < 0) throw LoadError(table.file, row, "years must be >= 0");
    if (p.waste < 0 || p.waste > 1) throw LoadError(table.file, row, "waste must be in [0,1]");
    if (p.production < 0) throw LoadError(table.file, row, "production must be >= 0");
    wb.profiles.push_back(std::move(p));
  }
  if (wb.profiles.empty()) throw LoadError(table.file, 0, "expert panel is empty");
}

void verify_exclusive(const Workbook& wb) {
  std::vector<rules::ExprPtr> exprs;
  for (const auto& t : wb.system_fms) exprs.push_back(t.rule.expanded);
  const auto abstraction = rules::abstract_atoms(exprs);
  rules::ExclusivityReport report;
  if (abstraction.atoms.size() <= rules::kMaxExhaustiveConditions) {
    report = rules::check_mutual_exclusivity(abstraction.rules, abstraction.atoms);
  } else {
    report = rules::sample_mutual_exclusivity(abstraction.rules, abstraction.atoms, 1u << 20, 0);
  }
  if (!report.exclusive) {
    std::string msg = "system rules are not mutually exclusive: ";
    for (std::size_t i = 0; i < report.overlapping_rules.size(); ++i) {
      msg += (i ? " and " : "") + wb.system_fms[report.overlapping_rules[i]].fm.id;
    }
    msg += " both hold when";
    for (const auto& [atom, value] : report.witness) {
      msg += " [" + atom + "]=" + (value ? "true" : "false");
    }
    throw LoadError("system.csv", 0, msg);
  }
}

} // namespace

const KnowledgeTuple& Workbook::system_fm(std::string_view id) const {
  for (const auto& t : system_fms) {
    if (t.fm.id == id) return t;
  }
  throw NotFound("unknown system FM '" + std::string(id) + "'");
}

const ComponentFm& Workbook::component_fm(std::string_view id) const {
  for (const auto& c : component_fms) {
    if (c.tuple.fm.id == id) return c;
  }
  throw NotFound("unknown component FM '" + std::string(id) + "'");
}

const WeightCriterion& Workbook::criterion(std::string_view name) const {
  for (const auto& c : weight_update) {
    if (c.name == name) return c;
  }
  throw NotFound("unknown weight criterion '" + std::string(name) + "'");
}

std::vector<std::string> Workbook::system_labels() const {
  std::vector<std::string> out;
  for (const auto& t : system_fms) out.push_back(t.fm.id);
  return out;
}

namespace {
rules::SymbolTable with_thresholds(const std::map<std::string, rules::ValueKind, std::less<>>& vars,
                                   const rules::ThresholdSet& thresholds) {
  rules::SymbolTable t;
  t.variables = vars;
  for (const auto& [name, _] : thresholds) t.thresholds.insert(name);
  return t;
}
} // namespace

rules::SymbolTable Workbook::system_symbols() const { return with_thresholds(variables, system); }
rules::SymbolTable Workbook::component_symbols() const {
  return with_thresholds(variables, component);
}
rules::SymbolTable Workbook::team_symbols() const {
  std::map<std::string, rules::ValueKind, std::less<>> vars;
  for (auto v : kProfileVariables) vars.emplace(std::string(v), rules::ValueKind::Real);
  return with_thresholds(vars, team);
}

Workbook load_workbook(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError(dir.string(), 0, "workbook directory not found");
  Workbook wb;
  load_settings(dir, wb);
  load_weight_update(dir, wb);
  load_system(dir, wb);
  load_component(dir, wb);
  load_profiles(dir, wb);
  verify_exclusive(wb);
  return wb;
}

std::map<std::string, std::string> render_workbook(const Workbook& wb) {
  std::map<std::string, std::string> files;
  auto header = [](std::span<const std::string_view> cols, const std::vector<std::string>& extra) {
    csv::Row row(cols.begin(), cols.end());
    row.insert(row.end(), extra.begin(), extra.end());
    return row;
  };

  std::vector<csv::Row> rows{header(kSettingsHeader, {})};
  for (const auto& s : wb.settings) {
    const bool numeric = s.section != SettingSection::Variable;
    rows.push_back({std::string(section_name(s.section)), s.name,
                    numeric ? render_number(s.value) : s.value, s.unit});
  }
  files["settings.csv"] = csv::format(rows);

  rows = {header(kWeightHeader, {})};
  for (const auto& c : wb.weight_update) {
    rows.push_back({c.name, rules::to_string(*c.formula.rule), rules::defs_to_string(c.formula.defs)});
  }
  files["weight_update.csv"] = csv::format(rows);

  rows = {header(kSystemHeader, wb.system_extra_columns)};
  for (std::size_t i = 0; i < wb.system_fms.size(); ++i) {
    const auto& t = wb.system_fms[i];
    csv::Row r{t.process, t.subprocess, t.fm.id, t.fm.label, join_list(t.effects),
               rules::to_string(*t.rule.rule), rules::defs_to_string(t.rule.defs)};
    r.insert(r.end(), wb.system_extra[i].begin(), wb.system_extra[i].end());
    rows.push_back(std::move(r));
  }
  files["system.csv"] = csv::format(rows);

  rows = {header(kComponentHeader, wb.component_extra_columns)};
  for (const auto& c : wb.component_rows) {
    csv::Row r{c.fm_id, c.system_fm, c.cause, c.recommendation,
               c.rule ? rules::to_string(*c.rule->rule) : "",
               c.rule ? rules::defs_to_string(c.rule->defs) : ""};
    r.insert(r.end(), c.extra.begin(), c.extra.end());
    rows.push_back(std::move(r));
  }
  files["component.csv"] = csv::format(rows);

  rows = {header(kProfilesHeader, {})};
  for (const auto& p : wb.profiles) {
    rows.push_back({p.name, rules::format_number(p.e_g), rules::format_number(p.e_m),
                    rules::format_number(p.waste), rules::format_number(p.production)});
  }
  files["profiles.csv"] = csv::format(rows);
  return files;
}

void save_workbook(const Workbook& wb, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [name, content] : render_workbook(wb)) {
    csv::write_file((dir / name).string(), content);
  }
}

std::vector<CauseRecommendation>
causes_and_recommendations(const Workbook& wb, std::string_view system_fm,
                           std::span<const std::string> active_component_fms) {
  (void)wb.system_fm(system_fm);
  for (const auto& id : active_component_fms) (void)wb.component_fm(id);
  std::vector<CauseRecommendation> out;
  for (const auto& r : wb.component_rows) {
    if (r.system_fm != system_fm) continue;
    if (std::find(active_component_fms.begin(), active_component_fms.end(), r.fm_id) ==
        active_component_fms.end()) {
      continue;
    }
    out.push_back({r.fm_id, r.cause, r.recommendation});
  }
  return out;
}

std::vector<std::string> active_component_fms(const Workbook& wb, std::string_view system_fm,
                                              const rules::Snapshot& snapshot) {
  std::vector<std::string> out;
  for (const auto& c : wb.component_fms) {
    if (c.system_fm != system_fm) continue;
    try {
      if (rules::eval_bool(*c.tuple.rule.expanded, snapshot, wb.component)) {
        out.push_back(c.tuple.fm.id);
      }
    } catch (const rules::EvalError& e) {
      throw rules::EvalError("component FM '" + c.tuple.fm.id + "': " + e.what(), e.variable());
    }
  }
  return out;
}

} // namespace klafate::fmea
