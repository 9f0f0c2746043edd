#include "klafate/kpi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "klafate/csv.hpp"
#include "klafate/ruledsl.hpp"

namespace klafate::kpi {

void KpiSeries::validate() const {
  if (!(window_s > 0.0)) throw InvalidParameter("KPI window must be positive");
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].timestamp > samples[i - 1].timestamp)) {
      throw InvalidParameter("KPI timestamps must be strictly increasing");
    }
  }
}

std::vector<double> KpiSeries::values() const {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.value);
  return v;
}

KpiSeries production_rate(std::span<const double> completions, double bin_s, double start,
                          double end) {
  if (!(bin_s > 0.0)) throw InvalidParameter("production-rate window must be positive");
  if (!(end > start)) throw InvalidParameter("production-rate range is empty");
  const auto bins = static_cast<std::size_t>(std::floor((end - start) / bin_s + 1e-9));
  std::vector<std::size_t> counts(bins, 0);
  for (double t : completions) {
    if (t < start) continue;
    const auto i = static_cast<std::size_t>(std::floor((t - start) / bin_s));
    if (i < bins) ++counts[i];
  }
  KpiSeries out{"production_rate", bin_s, {}};
  out.samples.reserve(bins);
  const double minutes = bin_s / 60.0;
  for (std::size_t i = 0; i < bins; ++i) {
    out.samples.push_back({start + static_cast<double>(i + 1) * bin_s,
                           static_cast<double>(counts[i]) / minutes});
  }
  return out;
}

KpiSeries moving_average(const KpiSeries& series, std::size_t n) {
  if (n == 0) throw InvalidParameter("moving-average length must be positive");
  KpiSeries out{series.metric, series.window_s, {}};
  out.samples.reserve(series.samples.size());
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    const auto count = std::min(i + 1, n);
    double sum = 0.0;
    for (std::size_t j = i + 1 - count; j <= i; ++j) sum += series.samples[j].value;
    out.samples.push_back({series.samples[i].timestamp, sum / static_cast<double>(count)});
  }
  return out;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidParameter("mean of an empty series");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double mean(const KpiSeries& series) {
  const auto v = series.values();
  return mean(v);
}

KpiSeries slice(const KpiSeries& series, double from, double to) {
  KpiSeries out{series.metric, series.window_s, {}};
  for (const auto& s : series.samples) {
    if (s.timestamp > from && s.timestamp <= to) out.samples.push_back(s);
  }
  return out;
}

std::string_view horizon_name(Horizon h) {
  return h == Horizon::ShortTerm ? "short_term" : "long_term";
}

ValidationVerdict validate_rule(std::span<const double> current, std::span<const double> targets,
                                std::span<const double> kpi_weights, double threshold,
                                Horizon horizon) {
  if (current.empty()) throw InvalidParameter("validation needs at least one KPI");
  if (current.size() != targets.size() || current.size() != kpi_weights.size()) {
    throw InvalidParameter("KPI, target and weight lists must be aligned");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (!(targets[i] > 0.0)) throw InvalidParameter("KPI target must be positive");
    if (!(kpi_weights[i] >= 0.0 && kpi_weights[i] <= 1.0)) {
      throw InvalidParameter("KPI weight must lie in [0,1]");
    }
    sum += current[i] * kpi_weights[i] / targets[i];
  }
  ValidationVerdict v;
  v.k_v = sum / static_cast<double>(current.size());
  v.threshold = threshold;
  v.accepted = v.k_v >= threshold;
  v.horizon = horizon;
  return v;
}

double improvement_ratio(double candidate, double incumbent) {
  if (!(incumbent > 0.0)) throw InvalidParameter("incumbent KPI must be positive");
  return candidate / incumbent;
}

double machine_availability(double productive_s, double window_s) {
  if (!(window_s > 0.0)) throw InvalidParameter("availability window must be positive");
  return std::clamp(productive_s / window_s, 0.0, 1.0);
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw UndefinedStatistic("incomplete beta continued fraction did not converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameter("beta parameters must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidParameter("beta argument must lie in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw InvalidParameter("F degrees of freedom must be positive");
  if (std::isnan(f)) throw InvalidParameter("F statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

AnovaResult anova_one_way(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw InvalidParameter("ANOVA needs at least two groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw InvalidParameter("every ANOVA group needs at least two samples");
    for (double v : g) {
      if (!std::isfinite(v)) throw InvalidParameter("ANOVA samples must be finite");
      grand += v;
    }
    n += g.size();
  }
  grand /= static_cast<double>(n);

  double ss_between = 0.0;
  double ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = mean(g);
    ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) ss_within += (v - m) * (v - m);
  }
  if (ss_between + ss_within == 0.0) {
    throw UndefinedStatistic("ANOVA is undefined: all values are identical");
  }
  if (ss_within == 0.0) {
    throw UndefinedStatistic("ANOVA is undefined: zero within-group variance");
  }
  AnovaResult r;
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(n - groups.size());
  r.f_statistic = (ss_between / r.df_between) / (ss_within / r.df_within);
  r.p_value = f_survival(r.f_statistic, r.df_between, r.df_within);
  // A p-value of exactly 0 is an underflow; report the smallest positive double.
  if (r.p_value <= 0.0) r.p_value = std::numeric_limits<double>::denorm_min();
  return r;
}

std::string series_to_csv(const KpiSeries& series) {
  std::vector<std::vector<std::string>> rows{{"timestamp", "value"}};
  for (const auto& s : series.samples) {
    rows.push_back({rules::format_number(s.timestamp), rules::format_number(s.value)});
  }
  return csv::format(rows);
}

namespace {

double parse_double(const std::string& text, std::size_t row) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw InvalidParameter("KPI CSV row " + std::to_string(row) + ": not a number: '" + text + "'");
  }
  return v;
}

} // namespace

KpiSeries series_from_csv(std::string_view text, std::string metric) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"timestamp", "value"}) {
    throw InvalidParameter("KPI CSV must start with header timestamp,value");
  }
  KpiSeries out{std::move(metric), 60.0, {}};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) {
      throw InvalidParameter("KPI CSV row " + std::to_string(i + 1) + ": expected 2 fields");
    }
    out.samples.push_back({parse_double(rows[i][0], i + 1), parse_double(rows[i][1], i + 1)});
  }
  if (out.samples.size() >= 2) {
    out.window_s = out.samples[1].timestamp - out.samples[0].timestamp;
  }
  out.validate();
  return out;
}

} // namespace klafate::kpi
