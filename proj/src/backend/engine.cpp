#include "klafate/backend/engine.hpp"

#include <algorithm>
#include <cmath>

namespace klafate::backend {

// --- data source ------------------------------------------------------------

SimulatorSource::SimulatorSource(bgsim::Simulator sim, double dt) : sim_(std::move(sim)), dt_(dt) {
  if (!(dt > 0.0)) throw InvalidParameter("simulator step must be positive");
}

Reading SimulatorSource::read() {
  sim_.step(dt_);
  Reading r;
  r.snapshot = sim_.snapshot();
  const auto& trace = sim_.trace();
  for (; trace_seen_ < trace.size(); ++trace_seen_) {
    const auto& e = trace[trace_seen_];
    if (e.event == "recipe") {
      r.events.push_back({"recipe_change", {{"recipe", e.value}, {"sim_time", e.time}}});
    } else if (e.event == "inject" || e.event == "clear") {
      r.events.push_back(
          {"fault_injected", {{"fault", e.value}, {"action", e.event}, {"sim_time", e.time}}});
    }
  }
  return r;
}

Json to_json(const Reply& r) {
  Json j;
  j["ok"] = r.ok;
  j["phase"] = phase_name(r.phase);
  if (!r.ok) j["error"] = r.error;
  return j;
}

double wall_clock_now() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

// --- engine -----------------------------------------------------------------

namespace {

knowledge::Assessment quiet_assessment(const knowledge::KnowledgeModel& model, double ts) {
  knowledge::Assessment a;
  a.fm_id = model.exit_label();
  a.label = "no fault";
  a.uncertainty = 0.0;
  a.detected_at = ts;
  a.published_at = ts;
  return a;
}

bool conserves(const evidence::MassVector& m) {
  if (std::fabs(m.total() - 1.0) > evidence::kConservationTolerance) return false;
  const auto arr = m.as_array();
  return std::all_of(arr.begin(), arr.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

std::optional<double> real_value(const rules::Snapshot& s, std::string_view name) {
  auto it = s.values.find(name);
  if (it == s.values.end()) return std::nullopt;
  if (const double* d = std::get_if<double>(&it->second)) return *d;
  return std::nullopt;
}

} // namespace

Engine::Engine(const fmea::Workbook& wb, EventStore& store, Bus& bus, EngineOptions options)
    : wb_(wb), store_(store), bus_(bus), options_(options),
      model_(knowledge::KnowledgeModel::from_workbook(wb)),
      panel_(weights::assess_panel(wb).panel) {
  if (options_.debounce == 0) throw InvalidParameter("debounce must be at least 1");
  const auto records = store_.records();
  const bool resumed = std::any_of(records.begin(), records.end(),
                                   [](const EventRecord& r) { return r.kind == "weight_update"; });
  if (resumed) {
    auto snap = store_.load_snapshot();
    book_ = replay_weights(records, snap);
    session_ = begin_monitoring(session_).state;
  }
  prime(wall_clock_now());
}

void Engine::prime(double now) {
  // Priors for every label without a logged weight; on a fresh log this is
  // the FIRST_RUN step.
  for (const auto& label : model_.frame().labels()) {
    if (book_.contains(label)) continue;
    auto w = weights::prior_weight(label, panel_, now);
    store_.append("weight_update", weight_update_payload(w, "prior"), now);
    book_.set(std::move(w));
  }
  if (session_.phase == Phase::FirstRun) session_ = begin_monitoring(session_).state;
  AssessmentMessage quiet{0, quiet_assessment(model_, now), model_.frame().labels(), 0, 0.0};
  latest_ = to_json(quiet);
  bus_.publish(std::string(kTopicAssessment), dump(*latest_));
  publish_status(now);
}

void Engine::on_reading(const Reading& reading, double now) {
  const auto& snap = reading.snapshot;
  for (const auto& e : reading.events) store_.append(e.kind, e.payload, now);

  if (!last_kpi_sample_ || snap.timestamp - *last_kpi_sample_ >= options_.kpi_sample_period_s) {
    Json p;
    p["sim_time"] = snap.timestamp;
    p["production_rate"] = real_value(snap, "system.production_rate").value_or(0.0);
    p["silo_level"] = real_value(snap, "system.silo_level").value_or(0.0);
    store_.append("kpi_sample", std::move(p), now);
    last_kpi_sample_ = snap.timestamp;
  }
  last_reading_ = reading;

  auto a = knowledge::assess(model_, wb_, book_, snap);

  if (session_.phase == Phase::Monitor) {
    if (!a.is_fault()) {
      candidate_.clear();
      candidate_count_ = 0;
      return;
    }
    if (a.fm_id != candidate_) {
      candidate_ = a.fm_id;
      candidate_count_ = 0;
      candidate_since_ = now;
    }
    if (++candidate_count_ < options_.debounce) return;
    if (!conserves(*a.evidence)) {
      publish_status(now, "assessment for " + a.fm_id + " violates evidence conservation");
      return;
    }
    a.detected_at = candidate_since_;
    AssessmentMessage msg{0, std::move(a), model_.frame().labels(), 0, snap.timestamp};
    auto t = open_episode(session_, std::move(msg), now);
    if (!t.accepted) return;
    session_ = std::move(t.state);
    store_.append("assessment", to_json(*session_.current), now);
    publish_assessment();
    publish_status(now);
    return;
  }

  if (session_.phase == Phase::AwaitResolution || session_.phase == Phase::AwaitAck) {
    // Fault gone from the data: propose "solved" for the operator to confirm.
    const bool cleared = !a.is_fault() || a.fm_id != session_.current->assessment.fm_id;
    if (cleared != proposal_solved_) {
      proposal_solved_ = cleared;
      publish_status(now);
    }
  }
}

Reply Engine::on_user_event(const UserEvent& e, double now) {
  auto t = handle_user_event(session_, e, now);
  if (!t.accepted) {
    publish_status(now, t.error);
    return {false, t.error, session_.phase, Effect::None};
  }
  session_ = std::move(t.state);
  Json payload = to_json(e);
  payload["episode"] = session_.episodes;
  store_.append(event_kind_name(e.kind), std::move(payload), now);

  switch (t.effect) {
  case Effect::Advanced:
  case Effect::RequestReport: publish_assessment(); break;
  case Effect::CloseSolved: {
    const weights::KpiEntry met[] = {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
    weights::Criteria c{panel_, weights::kpi_compliance(met), std::nullopt};
    if (e.stars) c.user = weights::user_rating_weight(*e.stars);
    close_episode(c, "solved", now);
    break;
  }
  case Effect::CloseReported:
    close_episode(weights::Criteria{panel_, 0.0, std::nullopt}, "report", now);
    break;
  default: break;
  }
  publish_status(now);
  return {true, {}, session_.phase, t.effect};
}

void Engine::close_episode(const weights::Criteria& criteria, std::string_view reason, double now) {
  session_.probes.close_ts = now;
  const auto sample = measure_latency(session_.probes);
  latency_.add(sample);
  samples_.push_back(sample);

  const auto& id = session_.current->assessment.fm_id;
  auto w = weights::accumulate(book_.at(id), weights::rule_weight(criteria), criteria, now);
  store_.append("weight_update", weight_update_payload(w, reason), now);
  book_.set(std::move(w));
  store_.maybe_snapshot(book_);

  candidate_.clear();
  candidate_count_ = 0;
  proposal_solved_ = false;

  AssessmentMessage quiet{session_.episodes, quiet_assessment(model_, now),
                          model_.frame().labels(), 0,
                          last_reading_ ? last_reading_->snapshot.timestamp : 0.0};
  latest_ = to_json(quiet);
  bus_.publish(std::string(kTopicAssessment), dump(*latest_));
}

void Engine::publish_assessment() {
  latest_ = to_json(*session_.current);
  bus_.publish(std::string(kTopicAssessment), dump(*latest_));
}

void Engine::publish_status(double now, const std::string& error) {
  auto j = status_json(now);
  if (!error.empty()) j["error"] = error;
  bus_.publish(std::string(kTopicStatus), dump(j));
}

Json Engine::status_json(double now) const {
  Json j;
  j["phase"] = phase_name(session_.phase);
  j["episode"] = session_.episodes;
  const bool open = session_.current && session_.phase != Phase::Monitor &&
                    session_.phase != Phase::FirstRun;
  j["fm_id"] = open ? Json(session_.current->assessment.fm_id) : Json(nullptr);
  j["pair_index"] = open ? Json(session_.current->pair_index) : Json(nullptr);
  j["proposal"] = proposal_solved_ ? Json("solved") : Json(nullptr);
  j["ts"] = now;
  return j;
}

Json Engine::metrics_json() const {
  Json j;
  j["latency"] = latency_.to_json();
  Json kpi;
  if (last_reading_) {
    const auto& s = last_reading_->snapshot;
    kpi["sim_time"] = s.timestamp;
    kpi["production_rate"] = real_value(s, "system.production_rate").value_or(0.0);
    kpi["silo_level"] = real_value(s, "system.silo_level").value_or(0.0);
  }
  j["kpi"] = kpi.is_null() ? Json::object() : kpi;
  j["weights"] = to_json(book_);
  j["events"] = store_.last_seq();
  j["episodes"] = session_.episodes;
  j["phase"] = phase_name(session_.phase);
  return j;
}

std::optional<Json> Engine::assessment_json() const { return latest_; }

// --- runner -----------------------------------------------------------------

ServiceRunner::ServiceRunner(Engine& engine, DataSource& source, Bus& bus, RunnerOptions options)
    : engine_(engine), source_(source), bus_(bus), options_(options) {
  bus_sub_ = bus_.subscribe(std::string(kTopicEventPrefix) + "+",
                            [this](const std::string& topic, const std::string& payload) {
                              const auto kind = topic.substr(kTopicEventPrefix.size());
                              try {
                                Json j = Json::parse(payload.empty() ? "{}" : payload);
                                if (!j.contains("kind")) j["kind"] = kind;
                                if (j["kind"] != kind) return;
                                submit(user_event_from_json(j));
                              } catch (const std::exception&) {
                                // malformed bus payloads are dropped
                              }
                            });
}

ServiceRunner::~ServiceRunner() {
  stop();
  bus_.unsubscribe(bus_sub_);
}

void ServiceRunner::start() {
  std::lock_guard lock(mutex_);
  if (thread_.joinable()) return;
  stopping_ = false;
  thread_ = std::thread([this] { loop(); });
}

void ServiceRunner::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  // Commands that never ran would leave their futures hanging.
  std::deque<std::function<void()>> rest;
  {
    std::lock_guard lock(mutex_);
    rest.swap(commands_);
  }
  for (auto& c : rest) c();
}

std::future<Reply> ServiceRunner::submit(UserEvent e) {
  auto task = std::make_shared<std::packaged_task<Reply()>>(
      [this, e] { return engine_.on_user_event(e, wall_clock_now()); });
  auto fut = task->get_future();
  {
    std::lock_guard lock(mutex_);
    if (thread_.joinable() && !stopping_) {
      commands_.push_back([task] { (*task)(); });
      cv_.notify_all();
      return fut;
    }
  }
  (*task)();
  return fut;
}

std::future<Json> ServiceRunner::query(std::function<Json(const Engine&)> fn) {
  auto task = std::make_shared<std::packaged_task<Json()>>(
      [this, fn = std::move(fn)] { return fn(engine_); });
  auto fut = task->get_future();
  {
    std::lock_guard lock(mutex_);
    if (thread_.joinable() && !stopping_) {
      commands_.push_back([task] { (*task)(); });
      cv_.notify_all();
      return fut;
    }
  }
  (*task)();
  return fut;
}

void ServiceRunner::loop() {
  using clock = std::chrono::steady_clock;
  auto delay = options_.poll_period;
  auto next_read = clock::now();
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    while (!commands_.empty()) {
      auto cmd = std::move(commands_.front());
      commands_.pop_front();
      lock.unlock();
      cmd();
      lock.lock();
    }
    if (stopping_) break;
    if (clock::now() >= next_read) {
      lock.unlock();
      try {
        engine_.on_reading(source_.read(), wall_clock_now());
        delay = options_.poll_period;
      } catch (const std::exception&) {
        ++source_errors_;
        delay = std::min(options_.max_backoff,
                         std::max(delay * 2, std::chrono::milliseconds(1)));
      }
      next_read = clock::now() + delay;
      lock.lock();
      continue;
    }
    cv_.wait_until(lock, next_read, [this] { return stopping_ || !commands_.empty(); });
  }
}

} // namespace klafate::backend
