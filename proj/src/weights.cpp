#include "klafate/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace klafate::weights {

CriterionUndefined::CriterionUndefined(const std::string& member, const std::string& criterion)
    : Error("criterion " + criterion + " is undefined for member '" + member +
            "' (no clause matched)") {}

namespace {

double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

double checked_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw InvalidParameter(std::string(what) + " must lie in [0,1]");
  }
  return v;
}

} // namespace

MemberWeight member_weight(const fmea::MemberProfile& profile,
                           std::span<const fmea::WeightCriterion> formulas,
                           const rules::ThresholdSet& team_thresholds,
                           std::optional<int> decimals) {
  rules::Snapshot s;
  s.set("e_g", profile.e_g);
  s.set("e_m", profile.e_m);
  s.set("waste", profile.waste);
  s.set("production", profile.production);

  auto eval = [&](std::string_view name) {
    auto it = std::find_if(formulas.begin(), formulas.end(),
                           [&](const fmea::WeightCriterion& c) { return c.name == name; });
    if (it == formulas.end()) {
      throw ConfigurationError("weight_update lacks criterion " + std::string(name));
    }
    const double v = rules::eval_real(*it->formula.expanded, s, team_thresholds);
    if (v == kUndefinedCriterion) throw CriterionUndefined(profile.name, std::string(name));
    if (v < 0.0 || v > 1.0) {
      throw InvalidParameter("criterion " + std::string(name) + " for member '" + profile.name +
                             "' evaluated outside [0,1]");
    }
    return v;
  };

  MemberWeight m;
  m.member = profile.name;
  m.experience_general = eval("w_EG");
  m.experience_machine = eval("w_EM");
  m.kpi_performance = eval("w_KA");
  m.total = (m.experience_general + m.experience_machine + m.kpi_performance) / 3.0;
  if (decimals) m.total = round_to(m.total, *decimals);
  return m;
}

double panel_weight(std::span<const double> member_weights) {
  if (member_weights.empty()) throw InvalidParameter("expert panel is empty");
  for (double w : member_weights) checked_unit(w, "member weight");
  return std::accumulate(member_weights.begin(), member_weights.end(), 0.0) /
         static_cast<double>(member_weights.size());
}

double kpi_compliance(std::span<const KpiEntry> entries) {
  if (entries.empty()) throw InvalidParameter("KPI compliance needs at least one KPI");
  double sum = 0.0;
  for (const auto& e : entries) {
    if (!(e.target > 0.0)) throw InvalidParameter("KPI target must be positive");
    checked_unit(e.weight, "KPI weight");
    if (!(e.current >= 0.0)) throw InvalidParameter("KPI value must be non-negative");
    sum += e.current * e.weight / e.target;
  }
  return std::clamp(sum / static_cast<double>(entries.size()), 0.0, 1.0);
}

double user_rating_weight(int stars) {
  if (stars < 1 || stars > 5) {
    throw InvalidParameter("rating must be 1..5 stars, got " + std::to_string(stars));
  }
  return stars / 5.0;
}

double rule_weight(const Criteria& c) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : {c.panel, c.kpi, c.user}) {
    if (v) {
      sum += checked_unit(*v, "rule criterion");
      ++n;
    }
  }
  if (n == 0) throw InvalidParameter("rule weight needs at least one criterion");
  return sum / n;
}

double history_mean(std::span<const WeightSample> history, std::optional<std::size_t> window) {
  if (history.empty()) return 0.0;
  std::size_t first = 0;
  if (window && *window > 0 && *window < history.size()) first = history.size() - *window;
  double sum = 0.0;
  for (std::size_t i = first; i < history.size(); ++i) sum += history[i].value;
  return sum / static_cast<double>(history.size() - first);
}

RuleWeight prior_weight(std::string rule_id, double panel, double timestamp) {
  RuleWeight w;
  w.rule_id = std::move(rule_id);
  w.criteria.panel = checked_unit(panel, "panel weight");
  w.current = panel;
  w.history.push_back({timestamp, panel});
  w.accumulated = panel;
  return w;
}

RuleWeight accumulate(RuleWeight weight, double value, const Criteria& criteria, double timestamp,
                      std::optional<std::size_t> window) {
  weight.current = checked_unit(value, "rule weight");
  weight.criteria = criteria;
  weight.history.push_back({timestamp, value});
  weight.accumulated = history_mean(weight.history, window);
  return weight;
}

PanelAssessment assess_panel(const fmea::Workbook& wb) {
  PanelAssessment out;
  std::vector<double> totals;
  for (const auto& p : wb.profiles) {
    out.members.push_back(
        member_weight(p, wb.weight_update, wb.team, wb.model.member_weight_decimals));
    totals.push_back(out.members.back().total);
  }
  out.panel = panel_weight(totals);
  return out;
}

WeightBook::WeightBook(std::span<const std::string> rule_ids, double panel, double timestamp) {
  for (const auto& id : rule_ids) weights_.emplace(id, prior_weight(id, panel, timestamp));
}

const RuleWeight& WeightBook::at(std::string_view rule_id) const {
  auto it = weights_.find(rule_id);
  if (it == weights_.end()) {
    throw ConfigurationError("no weight for rule '" + std::string(rule_id) + "'");
  }
  return it->second;
}

bool WeightBook::contains(std::string_view rule_id) const { return weights_.contains(rule_id); }

void WeightBook::set(RuleWeight weight) {
  auto id = weight.rule_id;
  weights_.insert_or_assign(std::move(id), std::move(weight));
}

std::vector<double> WeightBook::current(std::span<const std::string> rule_ids) const {
  std::vector<double> out;
  out.reserve(rule_ids.size());
  for (const auto& id : rule_ids) out.push_back(at(id).current);
  return out;
}

} // namespace klafate::weights
