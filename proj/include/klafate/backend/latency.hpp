#pragma once

#include <mutex>
#include <optional>
#include <vector>

#include "klafate/backend/protocol.hpp"
#include "klafate/backend/session.hpp"

namespace klafate::backend {

struct LatencySample {
  std::optional<double> publish_to_ack_ms;
  std::optional<double> detect_to_display_ms;
  std::optional<double> cycle_ms; // detection to episode close, operator time included

  bool operator==(const LatencySample&) const = default;
};

// Missing probes leave the dependent fields empty.
LatencySample measure_latency(const LatencyProbes& probes);

struct LatencySummary {
  std::size_t count = 0;
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double max_ms = 0.0;
};

LatencySummary summarize(std::vector<double> values);

class LatencyStats {
public:
  void add(const LatencySample& s);
  LatencySummary publish_to_ack() const;
  LatencySummary detect_to_display() const;
  LatencySummary cycle() const;
  Json to_json() const;

private:
  mutable std::mutex mutex_;
  std::vector<double> publish_to_ack_;
  std::vector<double> detect_to_display_;
  std::vector<double> cycle_;
};

Json to_json(const LatencySample& s);
Json to_json(const LatencySummary& s);

} // namespace klafate::backend
