#pragma once

// Production KPIs over machine-data windows, knowledge validation against
// targets and one-way ANOVA for recipe comparison.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "klafate/error.hpp"

namespace klafate::kpi {

struct Sample {
  double timestamp = 0.0; // seconds
  double value = 0.0;
  bool operator==(const Sample&) const = default;
};

struct KpiSeries {
  std::string metric;  // e.g. "production_rate"
  double window_s = 60.0;
  std::vector<Sample> samples;

  // Throws InvalidParameter on a nonpositive window or non-increasing timestamps.
  void validate() const;
  std::vector<double> values() const;
};

// Completion timestamps binned into [start + i*bin, start + (i+1)*bin).
// Each sample is stamped at its bin end and holds products per minute.
// Bins without products read 0.
KpiSeries production_rate(std::span<const double> completions, double bin_s, double start,
                          double end);

// Trailing mean over min(n, available) samples, aligned to the input.
KpiSeries moving_average(const KpiSeries& series, std::size_t n);

double mean(std::span<const double> values);
double mean(const KpiSeries& series);

// Samples with timestamp in (from, to].
KpiSeries slice(const KpiSeries& series, double from, double to);

enum class Horizon { ShortTerm, LongTerm };
std::string_view horizon_name(Horizon h);

inline constexpr double kDefaultAcceptance = 1.0;
inline constexpr double kLongTermMultiple = 3.0;

struct ValidationVerdict {
  double k_v = 0.0;
  double threshold = kDefaultAcceptance;
  bool accepted = false;
  Horizon horizon = Horizon::ShortTerm;
};

// K_V = mean(K_C * w_KC / K_T); accepted iff K_V >= threshold.
ValidationVerdict validate_rule(std::span<const double> current, std::span<const double> targets,
                                std::span<const double> kpi_weights,
                                double threshold = kDefaultAcceptance,
                                Horizon horizon = Horizon::ShortTerm);

// Ratio of candidate to incumbent KPI; > 1 means the candidate is better.
double improvement_ratio(double candidate, double incumbent);

// Fraction of the window the machine was producing.
double machine_availability(double productive_s, double window_s);

struct AnovaResult {
  double f_statistic = 0.0;
  double p_value = 1.0;
  double df_between = 0.0;
  double df_within = 0.0;
};

AnovaResult anova_one_way(std::span<const std::vector<double>> groups);

// I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// P(X > f) for X ~ F(d1, d2).
double f_survival(double f, double d1, double d2);

// CSV with header `timestamp,value`.
std::string series_to_csv(const KpiSeries& series);
KpiSeries series_from_csv(std::string_view text, std::string metric = "production_rate");

} // namespace klafate::kpi
