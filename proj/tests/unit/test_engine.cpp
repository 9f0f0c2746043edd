#include <algorithm>
#include <cmath>
#include <thread>

#include "doctest.h"
#include "klafate/backend/engine.hpp"
#include "support.hpp"

using namespace klafate;
using namespace klafate::backend;
namespace fs = std::filesystem;

namespace {

const fmea::Workbook& wb() {
  static const auto w = fmea::load_workbook(testsupport::fixture("bgs.fmea"));
  return w;
}

struct Capture {
  std::vector<Json> assessments;
  std::vector<Json> statuses;

  explicit Capture(Bus& bus) {
    bus.subscribe(std::string(kTopicAssessment), [this](const std::string&, const std::string& p) {
      assessments.push_back(Json::parse(p));
    });
    bus.subscribe(std::string(kTopicStatus), [this](const std::string&, const std::string& p) {
      statuses.push_back(Json::parse(p));
    });
  }
};

std::size_t count(const EventStore& store, std::string_view kind) {
  const auto r = store.records();
  return static_cast<std::size_t>(
      std::count_if(r.begin(), r.end(), [&](const EventRecord& e) { return e.kind == kind; }));
}

Reply send(Engine& e, EventKind k, std::optional<int> stars = std::nullopt, double now = 50.0) {
  return e.on_user_event({k, stars, k == EventKind::Report ? "hose split" : "", std::nullopt}, now);
}

void poll(Engine& e, SimulatorSource& src, int n, double now = 10.0) {
  for (int i = 0; i < n; ++i) e.on_reading(src.read(), now + i);
}

} // namespace

TEST_CASE("first run logs prior weights") {
  EventStore store;
  Bus bus;
  Capture cap(bus);
  Engine engine(wb(), store, bus);
  CHECK(engine.session().phase == Phase::Monitor);
  CHECK(engine.panel_weight() == doctest::Approx(0.71).epsilon(1e-12));
  CHECK(count(store, "weight_update") == 3);
  for (const auto& r : store.records()) CHECK(r.payload["reason"] == "prior");
  for (const auto& [id, w] : engine.weights().all()) CHECK(w.current == engine.panel_weight());
  REQUIRE(cap.assessments.size() == 1);
  CHECK(cap.assessments[0]["fm_id"] == "no_fault");
  REQUIRE(cap.statuses.size() == 1);
  CHECK(cap.statuses[0]["phase"] == "MONITOR");
}

TEST_CASE("scripted session: solved with four stars") {
  EventStore store;
  Bus bus;
  Capture cap(bus);
  Engine engine(wb(), store, bus);
  SimulatorSource src(bgsim::Simulator(7));

  poll(engine, src, 5);
  CHECK(engine.session().phase == Phase::Monitor);
  src.simulator().inject(bgsim::Fault::AirValveClosed);

  engine.on_reading(src.read(), 20.0);
  CHECK(engine.session().phase == Phase::Monitor); // debounce holds the first sighting
  engine.on_reading(src.read(), 21.0);
  REQUIRE(engine.session().phase == Phase::AwaitAck);

  const auto& a = cap.assessments.back();
  CHECK(a["fm_id"] == "LQ");
  CHECK(a["episode"] == 1);
  CHECK(a["w_r"].get<double>() == doctest::Approx(0.71).epsilon(1e-12));
  CHECK(a["detected_at"].get<double>() == 20.0);
  CHECK(a["published_at"].get<double>() == 21.0);
  double total = 0.0;
  for (const auto& v : a["evidence"]) total += v.get<double>();
  CHECK(std::fabs(total - 1.0) <= 1e-9);
  // All three labels at the prior: U = 1 - 0.71 (k + 2 (1-k)/2).
  CHECK(a["uncertainty"].get<double>() == doctest::Approx(0.29).epsilon(1e-12));
  CHECK(a["pairs"].size() == 2);
  CHECK(count(store, "assessment") == 1);
  CHECK(count(store, "fault_injected") == 1);

  CHECK(send(engine, EventKind::Ack, std::nullopt, 21.4).ok);
  CHECK(engine.session().phase == Phase::AwaitResolution);
  CHECK(send(engine, EventKind::Solved).ok);
  CHECK(engine.session().phase == Phase::AwaitRating);
  const auto r = send(engine, EventKind::Rating, 4, 60.0);
  CHECK(r.ok);
  CHECK(r.effect == Effect::CloseSolved);
  CHECK(engine.session().phase == Phase::Monitor);

  const auto& lq = engine.weights().at("LQ");
  CHECK(std::fabs(lq.current - (0.71 + 1.0 + 0.8) / 3.0) <= 1e-6);
  CHECK(lq.criteria.user == 0.8);
  CHECK(engine.weights().at("LP").current == engine.panel_weight());

  const auto records = store.records();
  const auto& last = records.back();
  CHECK(last.kind == "weight_update");
  CHECK(last.payload["reason"] == "solved");
  CHECK(last.payload["fm_id"] == "LQ");

  const auto replayed = replay_weights(records);
  CHECK(replayed == engine.weights());
  CHECK(dump(to_json(replayed)) == dump(to_json(engine.weights())));

  REQUIRE(engine.latency_samples().size() == 1);
  CHECK(*engine.latency_samples()[0].publish_to_ack_ms == doctest::Approx(400.0));
  CHECK(*engine.latency_samples()[0].cycle_ms == doctest::Approx(40000.0));
  CHECK(cap.assessments.back()["fm_id"] == "no_fault");
}

TEST_CASE("scripted session: pairs exhausted then report") {
  EventStore store;
  Bus bus;
  Capture cap(bus);
  Engine engine(wb(), store, bus);
  SimulatorSource src(bgsim::Simulator(7));
  src.simulator().inject(bgsim::Fault::AirValveClosed);
  poll(engine, src, 2);
  REQUIRE(engine.session().phase == Phase::AwaitAck);

  CHECK(send(engine, EventKind::Ack).ok);
  CHECK(send(engine, EventKind::Next).effect == Effect::Advanced);
  CHECK(cap.assessments.back()["pair_index"] == 1);
  CHECK(send(engine, EventKind::Next).effect == Effect::RequestReport);
  CHECK(engine.session().phase == Phase::AwaitReport);
  CHECK(send(engine, EventKind::Report).effect == Effect::CloseReported);

  const auto& lq = engine.weights().at("LQ");
  CHECK(lq.current == doctest::Approx((0.71 + 0.0) / 2.0).epsilon(1e-12));
  CHECK(lq.criteria.kpi == 0.0);
  CHECK_FALSE(lq.criteria.user.has_value());
  CHECK(store.records().back().payload["reason"] == "report");
  CHECK(replay_weights(store.records()) == engine.weights());
}

TEST_CASE("illegal events change nothing") {
  EventStore store;
  Bus bus;
  Capture cap(bus);
  Engine engine(wb(), store, bus);
  const auto before = store.last_seq();
  const auto session = engine.session();
  const auto r = send(engine, EventKind::Rating, 4);
  CHECK_FALSE(r.ok);
  CHECK(r.error.find("MONITOR") != std::string::npos);
  CHECK(store.last_seq() == before);
  CHECK(engine.session() == session);
  CHECK(cap.statuses.back().contains("error"));
}

TEST_CASE("one weight update per episode") {
  EventStore store;
  Bus bus;
  Engine engine(wb(), store, bus);
  SimulatorSource src(bgsim::Simulator(11));
  testsupport::Gen g(5);
  int closed = 0;
  for (int episode = 0; episode < 12; ++episode) {
    const auto fault = bgsim::all_faults()[static_cast<std::size_t>(g.integer(0, 2))];
    src.simulator().inject(fault);
    for (int i = 0; i < 4 && engine.session().phase == Phase::Monitor; ++i) {
      engine.on_reading(src.read(), 100.0 * episode + i);
    }
    REQUIRE(engine.session().phase == Phase::AwaitAck);
    // Random operator: legal and illegal events mixed.
    while (engine.session().phase != Phase::Monitor) {
      const auto k = kAllEventKinds[static_cast<std::size_t>(g.integer(0, 4))];
      send(engine, k, k == EventKind::Rating ? std::optional(g.integer(1, 5)) : std::nullopt);
    }
    ++closed;
    src.simulator().clear(fault);
    poll(engine, src, 2);
  }
  CHECK(count(store, "weight_update") == 3 + static_cast<std::size_t>(closed));
  CHECK(engine.session().episodes == static_cast<std::uint64_t>(closed));
  CHECK(replay_weights(store.records()) == engine.weights());
}

TEST_CASE("debounce suppresses one-snapshot blips") {
  EventStore store;
  Bus bus;
  Engine engine(wb(), store, bus);
  SimulatorSource src(bgsim::Simulator(3));
  for (int i = 0; i < 5; ++i) {
    src.simulator().inject(bgsim::Fault::AirValveClosed);
    engine.on_reading(src.read(), i);
    src.simulator().clear(bgsim::Fault::AirValveClosed);
    engine.on_reading(src.read(), i + 0.5);
  }
  CHECK(engine.session().phase == Phase::Monitor);
  CHECK(count(store, "assessment") == 0);
}

TEST_CASE("cleared fault proposes solved") {
  EventStore store;
  Bus bus;
  Capture cap(bus);
  Engine engine(wb(), store, bus);
  SimulatorSource src(bgsim::Simulator(7));
  src.simulator().inject(bgsim::Fault::AirValveClosed);
  poll(engine, src, 2);
  send(engine, EventKind::Ack);
  CHECK(engine.status_json(0)["proposal"].is_null());
  src.simulator().clear(bgsim::Fault::AirValveClosed);
  poll(engine, src, 1);
  CHECK(engine.status_json(0)["proposal"] == "solved");
  CHECK(cap.statuses.back()["proposal"] == "solved");
  CHECK(engine.session().phase == Phase::AwaitResolution);
}

TEST_CASE("kpi samples once per plant minute") {
  EventStore store;
  Bus bus;
  Engine engine(wb(), store, bus);
  SimulatorSource src(bgsim::Simulator(7));
  poll(engine, src, 180);
  CHECK(count(store, "kpi_sample") == 3);
  CHECK(count(store, "recipe_change") == 1);
  const auto m = engine.metrics_json();
  CHECK(m["kpi"]["sim_time"] == 180.0);
  CHECK(m["events"] == store.last_seq());
  CHECK(m["weights"].size() == 3);
}

TEST_CASE("restart resumes weights instead of priming") {
  const auto dir = testsupport::scratch_dir("engine");
  weights::WeightBook after;
  {
    EventStore store(dir);
    Bus bus;
    Engine engine(wb(), store, bus);
    SimulatorSource src(bgsim::Simulator(7));
    src.simulator().inject(bgsim::Fault::AirValveClosed);
    poll(engine, src, 2);
    send(engine, EventKind::Ack);
    send(engine, EventKind::Solved);
    send(engine, EventKind::Rating, 4);
    after = engine.weights();
  }
  EventStore store(dir);
  const auto seq = store.last_seq();
  Bus bus;
  Engine engine(wb(), store, bus);
  CHECK(engine.weights() == after);
  CHECK(store.last_seq() == seq);
  CHECK(engine.session().phase == Phase::Monitor);
  fs::remove_all(dir);
}

namespace {

class FlakySource : public DataSource {
public:
  explicit FlakySource(int failures) : failures_(failures), inner_(bgsim::Simulator(1)) {}
  Reading read() override {
    if (failures_-- > 0) throw DataSourceError("timeout");
    return inner_.read();
  }

private:
  int failures_;
  SimulatorSource inner_;
};

} // namespace

TEST_CASE("runner serializes events and survives source errors") {
  EventStore store;
  Bus bus;
  Capture cap(bus);
  Engine engine(wb(), store, bus);
  FlakySource src(3);
  RunnerOptions opt;
  opt.poll_period = std::chrono::milliseconds(1);
  opt.max_backoff = std::chrono::milliseconds(4);
  ServiceRunner runner(engine, src, bus, opt);
  runner.start();
  for (int i = 0; i < 200 && runner.source_errors() < 3; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  CHECK(runner.source_errors() == 3);

  auto reply = runner.submit({EventKind::Ack});
  REQUIRE(reply.wait_for(std::chrono::seconds(2)) == std::future_status::ready);
  CHECK_FALSE(reply.get().ok);

  // Events on the bus reach the owner as well.
  bus.publish(std::string(kTopicEventPrefix) + "rating", R"({"stars":4})");
  auto seen = runner.query([](const Engine& e) { return e.status_json(0); });
  REQUIRE(seen.wait_for(std::chrono::seconds(2)) == std::future_status::ready);
  seen.get();
  CHECK(cap.statuses.back()["error"].get<std::string>().find("rating") != std::string::npos);

  auto m = runner.query([](const Engine& e) { return e.metrics_json(); });
  REQUIRE(m.wait_for(std::chrono::seconds(2)) == std::future_status::ready);
  CHECK(m.get()["phase"] == "MONITOR");
  runner.stop();
  CHECK_FALSE(runner.running());

  // After stop, calls run inline.
  CHECK(runner.query([](const Engine& e) { return Json(e.session().episodes); }).get() == 0);
}
