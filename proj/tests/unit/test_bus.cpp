#include <atomic>
#include <thread>

#include "doctest.h"
#include "klafate/backend/bus.hpp"
#include "klafate/backend/latency.hpp"

using namespace klafate::backend;

TEST_CASE("topic filters") {
  CHECK(topic_matches("klafate/assessment", "klafate/assessment"));
  CHECK_FALSE(topic_matches("klafate/assessment", "klafate/status"));
  CHECK(topic_matches("klafate/event/+", "klafate/event/ack"));
  CHECK_FALSE(topic_matches("klafate/event/+", "klafate/event"));
  CHECK_FALSE(topic_matches("klafate/event/+", "klafate/event/ack/extra"));
  CHECK(topic_matches("klafate/#", "klafate/event/ack"));
  CHECK(topic_matches("#", "anything/at/all"));
  CHECK(topic_matches("+/status", "klafate/status"));
  CHECK_FALSE(topic_matches("klafate/+/ack", "klafate/status"));
}

TEST_CASE("publish reaches matching subscribers only") {
  Bus bus;
  std::vector<std::string> got;
  const auto a = bus.subscribe("klafate/event/+", [&](const std::string& t, const std::string& p) {
    got.push_back(t + "=" + p);
  });
  bus.subscribe("klafate/status", [&](const std::string&, const std::string& p) {
    got.push_back("status=" + p);
  });
  CHECK(bus.publish("klafate/event/ack", "{}") == 1);
  CHECK(bus.publish("klafate/status", "s") == 1);
  CHECK(bus.publish("klafate/assessment", "x") == 0);
  bus.unsubscribe(a);
  CHECK(bus.publish("klafate/event/next", "{}") == 0);
  CHECK(got == std::vector<std::string>{"klafate/event/ack={}", "status=s"});
}

TEST_CASE("handlers may unsubscribe and publish reentrantly") {
  Bus bus;
  int seen = 0;
  std::uint64_t id = 0;
  id = bus.subscribe("a", [&](const std::string&, const std::string&) {
    ++seen;
    bus.unsubscribe(id);
    bus.publish("b", "");
  });
  int b = 0;
  bus.subscribe("b", [&](const std::string&, const std::string&) { ++b; });
  bus.publish("a", "");
  bus.publish("a", "");
  CHECK(seen == 1);
  CHECK(b == 1);
}

TEST_CASE("concurrent publishers") {
  Bus bus;
  std::atomic<int> count{0};
  bus.subscribe("t/#", [&](const std::string&, const std::string&) { ++count; });
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&] {
      for (int k = 0; k < 1000; ++k) bus.publish("t/x", "");
    });
  }
  for (auto& t : threads) t.join();
  CHECK(count == 4000);
}

TEST_CASE("latency from probes") {
  LatencyProbes p;
  p.detect_ts = 9.0;
  p.publish_ts = 10.0;
  p.ack_ts = 10.45;
  p.display_ts = 10.2;
  p.close_ts = 19.0;
  const auto s = measure_latency(p);
  CHECK(*s.publish_to_ack_ms == doctest::Approx(450.0));
  CHECK(*s.detect_to_display_ms == doctest::Approx(1200.0));
  CHECK(*s.cycle_ms == doctest::Approx(10000.0));

  LatencyProbes partial;
  partial.publish_ts = 1.0;
  const auto q = measure_latency(partial);
  CHECK_FALSE(q.publish_to_ack_ms);
  CHECK_FALSE(q.detect_to_display_ms);
  CHECK_FALSE(q.cycle_ms);

  auto skewed = p;
  skewed.display_ts = 12.5 - 1e6;
  CHECK_FALSE(measure_latency(skewed).detect_to_display_ms);
  CHECK(measure_latency(skewed).publish_to_ack_ms);
}

TEST_CASE("latency summaries") {
  const auto s = summarize({300.0, 100.0, 200.0, 1000.0});
  CHECK(s.count == 4);
  CHECK(s.median_ms == 250.0);
  CHECK(s.mean_ms == 400.0);
  CHECK(s.max_ms == 1000.0);
  CHECK(summarize({}).count == 0);

  LatencyStats stats;
  stats.add({450.0, std::nullopt, 9000.0});
  stats.add({550.0, 5000.0, std::nullopt});
  CHECK(stats.publish_to_ack().median_ms == 500.0);
  CHECK(stats.detect_to_display().count == 1);
  CHECK(stats.cycle().count == 1);
  const auto j = stats.to_json();
  CHECK(j.contains("publish_to_ack"));
  CHECK(j["publish_to_ack"]["count"] == 2);
}
