#pragma once

// The backend main loop split in two: Engine holds session, weights and
// model and is driven synchronously; ServiceRunner owns an Engine on one
// thread, polls a DataSource and serializes operator events through a
// command queue.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <thread>

#include "klafate/backend/bus.hpp"
#include "klafate/backend/event_store.hpp"
#include "klafate/backend/latency.hpp"
#include "klafate/backend/session.hpp"
#include "klafate/bgsim.hpp"

namespace klafate::backend {

struct SourceEvent {
  std::string kind; // recipe_change | fault_injected
  Json payload;
};

struct Reading {
  rules::Snapshot snapshot;
  std::vector<SourceEvent> events;
};

class DataSourceError : public Error {
public:
  using Error::Error;
};

// Plant connection. read() returns the next snapshot or throws
// DataSourceError on timeout.
class DataSource {
public:
  virtual ~DataSource() = default;
  virtual Reading read() = 0;
};

// Steps a simulator by `dt` seconds of plant time per read.
class SimulatorSource : public DataSource {
public:
  SimulatorSource(bgsim::Simulator sim, double dt = 1.0);
  Reading read() override;
  bgsim::Simulator& simulator() { return sim_; }

private:
  bgsim::Simulator sim_;
  double dt_;
  std::size_t trace_seen_ = 0;
};

struct EngineOptions {
  std::size_t debounce = 2;          // consecutive snapshots before publishing a fault
  double kpi_sample_period_s = 60.0; // plant time between kpi_sample records
};

struct Reply {
  bool ok = false;
  std::string error;
  Phase phase = Phase::Monitor;
  Effect effect = Effect::None;
};

Json to_json(const Reply& r);

class Engine {
public:
  Engine(const fmea::Workbook& wb, EventStore& store, Bus& bus, EngineOptions options = {});

  void on_reading(const Reading& reading, double now);
  Reply on_user_event(const UserEvent& e, double now);

  const SessionState& session() const noexcept { return session_; }
  const weights::WeightBook& weights() const noexcept { return book_; }
  double panel_weight() const noexcept { return panel_; }
  const knowledge::KnowledgeModel& model() const noexcept { return model_; }
  const LatencyStats& latency() const noexcept { return latency_; }
  const std::vector<LatencySample>& latency_samples() const noexcept { return samples_; }

  Json status_json(double now) const;
  Json metrics_json() const;
  // Last assessment message published, a quiet one outside episodes.
  std::optional<Json> assessment_json() const;

private:
  void prime(double now);
  void publish_status(double now, const std::string& error = {});
  void publish_assessment();
  void close_episode(const weights::Criteria& criteria, std::string_view reason, double now);

  const fmea::Workbook& wb_;
  EventStore& store_;
  Bus& bus_;
  EngineOptions options_;
  knowledge::KnowledgeModel model_;
  double panel_ = 0.0;
  weights::WeightBook book_;
  SessionState session_;
  LatencyStats latency_;
  std::vector<LatencySample> samples_;

  std::string candidate_;
  std::size_t candidate_count_ = 0;
  double candidate_since_ = 0.0;
  bool proposal_solved_ = false;
  std::optional<double> last_kpi_sample_;
  std::optional<Reading> last_reading_;
  std::optional<Json> latest_;
};

struct RunnerOptions {
  std::chrono::milliseconds poll_period{1000};
  std::chrono::milliseconds max_backoff{8000};
};

double wall_clock_now();

class ServiceRunner {
public:
  ServiceRunner(Engine& engine, DataSource& source, Bus& bus, RunnerOptions options = {});
  ~ServiceRunner();
  ServiceRunner(const ServiceRunner&) = delete;
  ServiceRunner& operator=(const ServiceRunner&) = delete;

  void start();
  void stop();
  bool running() const noexcept { return thread_.joinable(); }

  std::future<Reply> submit(UserEvent e);
  // Runs `fn` on the owner thread and returns its result.
  std::future<Json> query(std::function<Json(const Engine&)> fn);

  std::uint64_t source_errors() const noexcept { return source_errors_; }

private:
  void loop();

  Engine& engine_;
  DataSource& source_;
  Bus& bus_;
  RunnerOptions options_;
  std::uint64_t bus_sub_ = 0;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> commands_;
  bool stopping_ = false;
  std::thread thread_;
  std::atomic<std::uint64_t> source_errors_{0};
};

} // namespace klafate::backend
