#include "klafate/knowledge.hpp"

#include <exception>

#include "klafate/exclusivity.hpp"

namespace klafate::knowledge {

RuleEvalError::RuleEvalError(const std::string& label, const rules::EvalError& cause)
    : Error("rule " + label + ": " + cause.what()), label_(label) {}

namespace {

evidence::Frame frame_of(const std::vector<LabeledRule>& rules) {
  std::vector<std::string> labels;
  labels.reserve(rules.size());
  for (const auto& r : rules) labels.push_back(r.label);
  return evidence::Frame(std::move(labels));
}

} // namespace

KnowledgeModel::KnowledgeModel(std::vector<LabeledRule> rules, std::string exit_label)
    : rules_(std::move(rules)), frame_(frame_of(rules_)), exit_label_(std::move(exit_label)) {
  if (frame_.contains(exit_label_)) {
    throw ConfigurationError("exit label '" + exit_label_ + "' collides with a rule label");
  }
  std::vector<rules::ExprPtr> exprs;
  for (const auto& r : rules_) exprs.push_back(r.rule);
  const auto abs = rules::abstract_atoms(exprs);
  rules::ExclusivityReport report =
      abs.atoms.size() <= rules::kMaxExhaustiveConditions
          ? rules::check_mutual_exclusivity(abs.rules, abs.atoms)
          : rules::sample_mutual_exclusivity(abs.rules, abs.atoms, 1u << 16, 0);
  if (!report.exclusive) {
    std::string msg = "rules are not mutually exclusive:";
    for (auto i : report.overlapping_rules) msg += " " + rules_[i].label;
    throw ConfigurationError(msg);
  }
}

KnowledgeModel KnowledgeModel::from_workbook(const fmea::Workbook& wb) {
  std::vector<LabeledRule> rules;
  for (const auto& t : wb.system_fms) rules.push_back({t.fm.id, t.rule.expanded});
  return KnowledgeModel(std::move(rules));
}

const std::string& KnowledgeModel::dispatch(const rules::Snapshot& snapshot,
                                            const rules::ThresholdSet& thresholds) const {
  for (const auto& r : rules_) {
    bool fired = false;
    try {
      fired = rules::eval_bool(*r.rule, snapshot, thresholds);
    } catch (const rules::EvalError& e) {
      throw RuleEvalError(r.label, e);
    }
    if (fired) return r.label;
  }
  return exit_label_;
}

std::vector<double> transform_labels(const KnowledgeModel& model, std::string_view active_label,
                                     int exponent) {
  return evidence::spread_masses(model.frame(), active_label,
                                 evidence::approximation_factor(exponent));
}

Assessment assess(const KnowledgeModel& model, const fmea::Workbook& wb,
                  std::span<const double> weights, const rules::Snapshot& snapshot, int exponent) {
  if (weights.size() != model.frame().size()) {
    throw ConfigurationError("weights do not cover every frame label");
  }
  Assessment a;
  a.detected_at = snapshot.timestamp;
  a.fm_id = model.dispatch(snapshot, wb.system);
  if (a.fm_id == model.exit_label()) {
    a.label = "no fault";
    a.uncertainty = 0.0;
    return a;
  }
  const auto& tuple = wb.system_fm(a.fm_id);
  a.label = tuple.fm.label;
  if (!tuple.effects.empty()) a.effect = tuple.effects.front();
  a.active_components = fmea::active_component_fms(wb, a.fm_id, snapshot);
  a.pairs = fmea::causes_and_recommendations(wb, a.fm_id, a.active_components);
  a.w_r = weights[model.frame().index_of(a.fm_id)];
  a.evidence = evidence::build_evidence(model.frame(), a.fm_id, weights, exponent);
  a.uncertainty = a.evidence->uncertainty;
  return a;
}

Assessment assess(const KnowledgeModel& model, const fmea::Workbook& wb,
                  const weights::WeightBook& book, const rules::Snapshot& snapshot) {
  const auto w = book.current(model.frame().labels());
  return assess(model, wb, w, snapshot, wb.model.approximation_exponent);
}

std::vector<Assessment> assess_batch_serial(const KnowledgeModel& model, const fmea::Workbook& wb,
                                            std::span<const double> weights,
                                            std::span<const rules::Snapshot> snapshots,
                                            int exponent) {
  std::vector<Assessment> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) out.push_back(assess(model, wb, weights, s, exponent));
  return out;
}

std::vector<Assessment> assess_batch(const KnowledgeModel& model, const fmea::Workbook& wb,
                                     std::span<const double> weights,
                                     std::span<const rules::Snapshot> snapshots, int exponent) {
  std::vector<Assessment> out(snapshots.size());
  const auto n = static_cast<long long>(snapshots.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
  for (long long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          assess(model, wb, weights, snapshots[static_cast<std::size_t>(i)], exponent);
    } catch (...) {
#pragma omp critical(klafate_batch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

} // namespace klafate::knowledge
