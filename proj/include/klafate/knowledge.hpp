#pragma once

// Executable knowledge model: first-match dispatch over mutually exclusive
// system rules, label transformation and assessment assembly.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "klafate/evidence.hpp"
#include "klafate/fmea.hpp"
#include "klafate/weights.hpp"

namespace klafate::knowledge {

inline constexpr std::string_view kExitLabel = "no_fault";

struct LabeledRule {
  std::string label;
  rules::ExprPtr rule;
};

class RuleEvalError : public Error {
public:
  RuleEvalError(const std::string& label, const rules::EvalError& cause);
  const std::string& label() const noexcept { return label_; }

private:
  std::string label_;
};

class KnowledgeModel {
public:
  // Throws ConfigurationError when the rules overlap or the exit label
  // collides with a frame label.
  KnowledgeModel(std::vector<LabeledRule> rules, std::string exit_label = std::string(kExitLabel));

  static KnowledgeModel from_workbook(const fmea::Workbook& wb);

  const evidence::Frame& frame() const noexcept { return frame_; }
  const std::vector<LabeledRule>& rules() const noexcept { return rules_; }
  const std::string& exit_label() const noexcept { return exit_label_; }

  // First rule that holds, otherwise the exit label.
  const std::string& dispatch(const rules::Snapshot& snapshot,
                              const rules::ThresholdSet& thresholds) const;

private:
  std::vector<LabeledRule> rules_;
  evidence::Frame frame_;
  std::string exit_label_;
};

std::vector<double> transform_labels(const KnowledgeModel& model, std::string_view active_label,
                                     int exponent);

struct Assessment {
  std::string fm_id; // active label or the exit label
  std::string label;
  std::string effect;
  std::vector<fmea::CauseRecommendation> pairs;
  std::vector<std::string> active_components;
  double w_r = 0.0;
  std::optional<evidence::MassVector> evidence;
  double uncertainty = 1.0;
  double detected_at = 0.0;
  double published_at = 0.0;

  bool is_fault() const noexcept { return evidence.has_value(); }
  bool operator==(const Assessment&) const = default;
};

// Weights are the current w_R per frame label, in frame order.
Assessment assess(const KnowledgeModel& model, const fmea::Workbook& wb,
                  std::span<const double> weights, const rules::Snapshot& snapshot, int exponent);

Assessment assess(const KnowledgeModel& model, const fmea::Workbook& wb,
                  const weights::WeightBook& book, const rules::Snapshot& snapshot);

// Batch assessment of many snapshots with shared weights. Output order
// matches input order. The parallel version distributes snapshots over
// OpenMP threads; the serial version is the reference.
std::vector<Assessment> assess_batch(const KnowledgeModel& model, const fmea::Workbook& wb,
                                     std::span<const double> weights,
                                     std::span<const rules::Snapshot> snapshots, int exponent);
std::vector<Assessment> assess_batch_serial(const KnowledgeModel& model, const fmea::Workbook& wb,
                                            std::span<const double> weights,
                                            std::span<const rules::Snapshot> snapshots,
                                            int exponent);

} // namespace klafate::knowledge
