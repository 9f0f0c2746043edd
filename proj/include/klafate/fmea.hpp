#pragma once

// Extended-FMEA knowledge workbook: a directory of five CSV files
// (settings, weight_update, system, component, profiles). The on-disk
// format is documented in docs/workbook_format.md.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "klafate/error.hpp"
#include "klafate/ruledsl.hpp"

namespace klafate::fmea {

class LoadError : public Error {
public:
  LoadError(const std::string& file, std::size_t row, const std::string& message);
  const std::string& file() const noexcept { return file_; }
  std::size_t row() const noexcept { return row_; }

private:
  std::string file_;
  std::size_t row_;
};

enum class SettingSection { Team, System, Component, Variable, Model };

std::string_view section_name(SettingSection s);

struct SettingRow {
  SettingSection section = SettingSection::Team;
  std::string name;
  std::string value;
  std::string unit;
};

// A rule as written (with its `C1 := ...` aliases) and its expanded,
// typechecked form used for evaluation.
struct RuleCell {
  rules::ExprPtr rule;
  std::vector<rules::Alias> defs;
  rules::ExprPtr expanded;
};

struct FailureMode {
  std::string id;
  std::string label;
  std::string description;
};

// (P, SP, FM, C, E, RE, R, w_R). One rule and one weight per tuple.
struct KnowledgeTuple {
  std::string process;
  std::string subprocess;
  FailureMode fm;
  std::vector<std::string> causes;
  std::vector<std::string> effects;
  std::vector<std::string> recommendations;
  RuleCell rule;
  std::string weight_ref;
};

struct ComponentRow {
  std::string fm_id;
  std::string system_fm;
  std::string cause;
  std::string recommendation;
  std::optional<RuleCell> rule; // empty on continuation rows of the same fm_id
  std::vector<std::string> extra;
};

struct ComponentFm {
  KnowledgeTuple tuple;
  std::string system_fm;
  std::vector<std::size_t> rows; // indices into Workbook::component_rows
};

struct MemberProfile {
  std::string name;
  double e_g = 0.0;        // years of general experience
  double e_m = 0.0;        // years on this machine
  double waste = 0.0;      // waste ratio
  double production = 0.0; // prod/min
};

struct WeightCriterion {
  std::string name;
  RuleCell formula;
};

struct ModelSettings {
  int approximation_exponent = 2;
  std::optional<int> member_weight_decimals;
  double kv_threshold = 1.0;
};

struct CauseRecommendation {
  std::string component_fm;
  std::string cause;
  std::string recommendation;
  bool operator==(const CauseRecommendation&) const = default;
};

inline constexpr std::string_view kProfileVariables[] = {"e_g", "e_m", "waste", "production"};
inline constexpr std::string_view kRequiredCriteria[] = {"w_EG", "w_EM", "w_KA"};

struct Workbook {
  std::vector<SettingRow> settings;
  rules::ThresholdSet team;
  rules::ThresholdSet system;
  rules::ThresholdSet component;
  std::map<std::string, rules::ValueKind, std::less<>> variables;
  ModelSettings model;

  std::vector<WeightCriterion> weight_update;

  std::vector<std::string> system_extra_columns;
  std::vector<std::vector<std::string>> system_extra; // per system FM
  std::vector<KnowledgeTuple> system_fms;

  std::vector<std::string> component_extra_columns;
  std::vector<ComponentRow> component_rows;
  std::vector<ComponentFm> component_fms;

  std::vector<MemberProfile> profiles;

  const KnowledgeTuple& system_fm(std::string_view id) const;
  const ComponentFm& component_fm(std::string_view id) const;
  const WeightCriterion& criterion(std::string_view name) const;
  std::vector<std::string> system_labels() const;

  rules::SymbolTable system_symbols() const;
  rules::SymbolTable component_symbols() const;
  rules::SymbolTable team_symbols() const;
};

// Atomic: either a fully parsed, typechecked, link-resolved Workbook or a
// LoadError. Also verifies that system rules are mutually exclusive.
Workbook load_workbook(const std::filesystem::path& dir);

// Canonical file contents keyed by file name.
std::map<std::string, std::string> render_workbook(const Workbook& wb);
void save_workbook(const Workbook& wb, const std::filesystem::path& dir);

// Pairs in component row order, restricted to the active component FMs that
// belong to `system_fm`.
std::vector<CauseRecommendation>
causes_and_recommendations(const Workbook& wb, std::string_view system_fm,
                           std::span<const std::string> active_component_fms);

// Component FMs of `system_fm` whose rule holds for the snapshot, in
// workbook order.
std::vector<std::string> active_component_fms(const Workbook& wb, std::string_view system_fm,
                                              const rules::Snapshot& snapshot);

} // namespace klafate::fmea
