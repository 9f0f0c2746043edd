#include "klafate/backend/latency.hpp"

#include <algorithm>
#include <numeric>

namespace klafate::backend {

LatencySample measure_latency(const LatencyProbes& p) {
  LatencySample s;
  if (p.publish_ts && p.ack_ts) s.publish_to_ack_ms = (*p.ack_ts - *p.publish_ts) * 1000.0;
  // A display time before detection comes from a client clock that is not
  // synchronized with ours; it says nothing about latency.
  if (p.detect_ts && p.display_ts && *p.display_ts >= *p.detect_ts)
    s.detect_to_display_ms = (*p.display_ts - *p.detect_ts) * 1000.0;
  if (p.detect_ts && p.close_ts) s.cycle_ms = (*p.close_ts - *p.detect_ts) * 1000.0;
  return s;
}

LatencySummary summarize(std::vector<double> v) {
  LatencySummary s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  s.median_ms = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  s.mean_ms = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  s.max_ms = v.back();
  return s;
}

void LatencyStats::add(const LatencySample& s) {
  std::lock_guard lock(mutex_);
  if (s.publish_to_ack_ms) publish_to_ack_.push_back(*s.publish_to_ack_ms);
  if (s.detect_to_display_ms) detect_to_display_.push_back(*s.detect_to_display_ms);
  if (s.cycle_ms) cycle_.push_back(*s.cycle_ms);
}

LatencySummary LatencyStats::publish_to_ack() const {
  std::lock_guard lock(mutex_);
  return summarize(publish_to_ack_);
}

LatencySummary LatencyStats::detect_to_display() const {
  std::lock_guard lock(mutex_);
  return summarize(detect_to_display_);
}

LatencySummary LatencyStats::cycle() const {
  std::lock_guard lock(mutex_);
  return summarize(cycle_);
}

Json to_json(const LatencySummary& s) {
  return Json{{"count", s.count}, {"median_ms", s.median_ms}, {"mean_ms", s.mean_ms},
              {"max_ms", s.max_ms}};
}

Json to_json(const LatencySample& s) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"publish_to_ack_ms", opt(s.publish_to_ack_ms)},
              {"detect_to_display_ms", opt(s.detect_to_display_ms)},
              {"cycle_ms", opt(s.cycle_ms)}};
}

Json LatencyStats::to_json() const {
  return Json{{"publish_to_ack", backend::to_json(publish_to_ack())},
              {"detect_to_display", backend::to_json(detect_to_display())},
              {"cycle", backend::to_json(cycle())}};
}

} // namespace klafate::backend
