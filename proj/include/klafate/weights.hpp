#pragma once

// Confidence weights: member -> panel (prior), KPI compliance, user rating,
// composed per rule and accumulated over history.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "klafate/fmea.hpp"

namespace klafate::weights {

struct MemberWeight {
  std::string member;
  double experience_general = 0.0; // w_EG
  double experience_machine = 0.0; // w_EM
  double kpi_performance = 0.0;    // w_KA
  double total = 0.0;              // w_M
};

class CriterionUndefined : public Error {
public:
  CriterionUndefined(const std::string& member, const std::string& criterion);
};

// Value a criterion formula returns when none of its clauses apply.
inline constexpr double kUndefinedCriterion = -1.0;

// w_M = (w_EG + w_EM + w_KA) / 3 evaluated from the weight_update formulas.
// With `decimals` set the result is rounded to that many places.
MemberWeight member_weight(const fmea::MemberProfile& profile,
                           std::span<const fmea::WeightCriterion> formulas,
                           const rules::ThresholdSet& team_thresholds,
                           std::optional<int> decimals = std::nullopt);

double panel_weight(std::span<const double> member_weights);

struct KpiEntry {
  double current = 0.0;  // K_C
  double target = 1.0;   // K_T > 0
  double weight = 1.0;   // w_KC in [0,1]
};

// w_K = mean(K_C * w_KC / K_T), clamped to [0,1].
double kpi_compliance(std::span<const KpiEntry> entries);

// Stars 1..5 map linearly to stars / 5.
double user_rating_weight(int stars);

struct Criteria {
  std::optional<double> panel; // w_P
  std::optional<double> kpi;   // w_K
  std::optional<double> user;  // w_U

  bool operator==(const Criteria&) const = default;
};

// Mean of the criteria present.
double rule_weight(const Criteria& criteria);

struct WeightSample {
  double timestamp = 0.0;
  double value = 0.0;
  bool operator==(const WeightSample&) const = default;
};

struct RuleWeight {
  std::string rule_id;
  double current = 0.0; // w_R
  Criteria criteria;
  std::vector<WeightSample> history;
  double accumulated = 0.0; // w_Ra

  bool operator==(const RuleWeight&) const = default;
};

// Prior weight: w_R = w_Ra = w_P with a single history entry.
RuleWeight prior_weight(std::string rule_id, double panel, double timestamp = 0.0);

// Appends `value` to history and recomputes w_Ra as the mean over the whole
// history, or over the last `window` samples when given.
RuleWeight accumulate(RuleWeight weight, double value, const Criteria& criteria,
                      double timestamp = 0.0, std::optional<std::size_t> window = std::nullopt);

double history_mean(std::span<const WeightSample> history,
                    std::optional<std::size_t> window = std::nullopt);

// Expert panel evaluation of a whole workbook.
struct PanelAssessment {
  std::vector<MemberWeight> members;
  double panel = 0.0;
};

PanelAssessment assess_panel(const fmea::Workbook& wb);

// Per-rule weights keyed by rule id, in frame order.
class WeightBook {
public:
  WeightBook() = default;
  WeightBook(std::span<const std::string> rule_ids, double panel, double timestamp = 0.0);

  const RuleWeight& at(std::string_view rule_id) const;
  bool contains(std::string_view rule_id) const;
  void set(RuleWeight weight);
  std::vector<double> current(std::span<const std::string> rule_ids) const;
  const std::map<std::string, RuleWeight, std::less<>>& all() const { return weights_; }

  bool operator==(const WeightBook&) const = default;

private:
  std::map<std::string, RuleWeight, std::less<>> weights_;
};

} // namespace klafate::weights
