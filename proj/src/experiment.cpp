#include "klafate/experiment.hpp"

#include <algorithm>

namespace klafate::experiment {

double trace_end(const std::vector<bgsim::TraceEvent>& trace) {
  double end = 0.0;
  for (const auto& e : trace) end = std::max(end, e.time);
  return end;
}

TimeSlot recipe_slot(const std::vector<bgsim::TraceEvent>& trace, double minutes,
                     std::optional<double> end) {
  if (!(minutes > 0.0)) throw InvalidParameter("time slot must be positive");
  const bgsim::TraceEvent* change = nullptr;
  for (const auto& e : trace) {
    if (e.event == "recipe") change = &e;
  }
  if (!change) throw InvalidParameter("trace has no recipe event");
  TimeSlot slot;
  slot.recipe = change->value;
  slot.start = change->time;
  slot.end = slot.start + minutes * kMinute;
  const double last = end.value_or(trace_end(trace));
  if (last + 1e-9 < slot.end) {
    throw InvalidParameter("trace for " + slot.recipe + " covers " +
                           rules::format_number((last - slot.start) / kMinute) +
                           " min after the recipe change, slot needs " +
                           rules::format_number(minutes));
  }
  const auto completions = bgsim::trace_completions(trace);
  slot.rate = kpi::production_rate(completions, kMinute, slot.start, slot.end);
  slot.smoothed = kpi::moving_average(slot.rate, kSmoothingSamples);
  return slot;
}

RecipeVerdict validate_recipe(const TimeSlot& slot, double target, double threshold) {
  RecipeVerdict v;
  v.recipe = slot.recipe;
  v.minutes = (slot.end - slot.start) / kMinute;
  v.rate = kpi::mean(slot.rate);
  v.smoothed_end = slot.smoothed.samples.empty() ? 0.0 : slot.smoothed.samples.back().value;
  v.target = target;
  const auto horizon = v.minutes >= kpi::kLongTermMultiple * 10.0 - 1e-9 ? kpi::Horizon::LongTerm
                                                                          : kpi::Horizon::ShortTerm;
  const double current[] = {v.rate};
  const double targets[] = {target};
  const double weights[] = {1.0};
  v.verdict = kpi::validate_rule(current, targets, weights, threshold, horizon);
  return v;
}

kpi::AnovaResult compare_slots(std::span<const TimeSlot> slots) {
  std::vector<std::vector<double>> groups;
  groups.reserve(slots.size());
  for (const auto& s : slots) groups.push_back(s.rate.values());
  return kpi::anova_one_way(groups);
}

} // namespace klafate::experiment
