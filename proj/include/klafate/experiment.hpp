#pragma once

// Recipe validation over simulator traces: a time slot after the last
// recipe change, its per-minute production rate and the K_V verdict.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "klafate/bgsim.hpp"
#include "klafate/kpi.hpp"

namespace klafate::experiment {

inline constexpr std::size_t kSmoothingSamples = 5;
inline constexpr double kMinute = 60.0;

struct TimeSlot {
  std::string recipe;
  double start = 0.0;
  double end = 0.0;
  kpi::KpiSeries rate;     // products per minute, one sample per minute
  kpi::KpiSeries smoothed; // trailing MA over kSmoothingSamples
};

// Time of the last event in the trace.
double trace_end(const std::vector<bgsim::TraceEvent>& trace);

// Slot of `minutes` starting at the last recipe event. Throws
// InvalidParameter when the trace has no recipe or ends before the slot does.
TimeSlot recipe_slot(const std::vector<bgsim::TraceEvent>& trace, double minutes,
                     std::optional<double> end = std::nullopt);

struct RecipeVerdict {
  std::string recipe;
  double minutes = 0.0;
  double rate = 0.0;     // K_C, mean production rate over the slot
  double smoothed_end = 0.0;
  double target = 0.0;   // K_T
  kpi::ValidationVerdict verdict;
};

// Slots of at least kLongTermMultiple * 10 min count as long-term.
RecipeVerdict validate_recipe(const TimeSlot& slot, double target,
                              double threshold = kpi::kDefaultAcceptance);

// Per-minute rates of each slot as ANOVA groups.
kpi::AnovaResult compare_slots(std::span<const TimeSlot> slots);

} // namespace klafate::experiment
