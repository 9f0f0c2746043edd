#include "doctest.h"
#include "klafate/backend/protocol.hpp"

using namespace klafate;
using namespace klafate::backend;

TEST_CASE("event kinds round trip by name") {
  for (EventKind k : kAllEventKinds) CHECK(parse_event_kind(event_kind_name(k)) == k);
  CHECK_THROWS_AS(parse_event_kind("restart"), ProtocolError);
  CHECK(event_kind_name(EventKind::Solved) == "solved");
}

TEST_CASE("user events parse and serialize") {
  const auto e = parse_user_event(R"({"kind":"rating","stars":4,"ts":12.5})");
  CHECK(e.kind == EventKind::Rating);
  CHECK(e.stars == 4);
  CHECK(e.ts == 12.5);
  CHECK(user_event_from_json(to_json(e)) == e);

  const auto r = parse_user_event(R"({"kind":"report","text":"belt torn"})");
  CHECK(r.text == "belt torn");
  CHECK_FALSE(r.ts.has_value());
  CHECK(user_event_from_json(to_json(r)) == r);

  CHECK(parse_user_event(R"({"kind":"rating"})").stars == std::nullopt);
  CHECK(parse_user_event(R"({"kind":"rating","stars":null})").stars == std::nullopt);
}

TEST_CASE("malformed user events are protocol errors") {
  const char* bad[] = {
      "not json",
      "[]",
      R"({"stars":3})",
      R"({"kind":5})",
      R"({"kind":"dance"})",
      R"({"kind":"rating","stars":0})",
      R"({"kind":"rating","stars":6})",
      R"({"kind":"rating","stars":3.5})",
      R"({"kind":"ack","stars":3})",
      R"({"kind":"next","text":"x"})",
      R"({"kind":"report","text":7})",
      R"({"kind":"ack","ts":"now"})",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_user_event(text), ProtocolError);
  }
}

TEST_CASE("assessment message fields") {
  knowledge::Assessment a;
  a.fm_id = "LQ";
  a.label = "low_quality_status";
  a.effect = "Product quality below specification";
  a.pairs = {{"closed_air_valve", "valve closed", "open valve"}};
  a.w_r = 0.84;
  a.evidence = evidence::build_evidence(evidence::Frame({"LQ", "LP", "NP"}), "LQ",
                                        std::vector<double>{0.84, 0.71, 0.71}, 2);
  a.uncertainty = a.evidence->uncertainty;
  a.detected_at = 100.0;
  a.published_at = 100.25;
  AssessmentMessage m{7, a, {"LQ", "LP", "NP"}, 0, 360.0};

  const auto j = to_json(m);
  const std::vector<std::string> keys = {"episode",  "fm_id",      "label",  "effect",
                                         "pairs",    "pair_index", "frame",  "w_r",
                                         "evidence", "uncertainty", "detected_at", "published_at",
                                         "sim_time"};
  std::vector<std::string> actual;
  for (const auto& [k, v] : j.items()) actual.push_back(k);
  CHECK(actual == keys);
  CHECK(j["pairs"][0]["cause"] == "valve closed");
  REQUIRE(j["evidence"].size() == 4);
  CHECK(j["evidence"][0].get<double>() == doctest::Approx(0.8316).epsilon(1e-12));
  CHECK(j["evidence"][3].get<double>() == doctest::Approx(0.1613).epsilon(1e-12));

  AssessmentMessage quiet{0, {}, {"LQ"}, 0, 0.0};
  quiet.assessment.fm_id = "no_fault";
  const auto q = to_json(quiet);
  CHECK(q["w_r"].is_null());
  CHECK(q["uncertainty"].is_null());
  CHECK(q["evidence"].empty());
}

TEST_CASE("weights serialize with criteria and history") {
  auto w = weights::prior_weight("LQ", 0.71, 1.0);
  w = weights::accumulate(w, 0.8366666666666667, {0.71, 1.0, 0.8}, 2.0);
  const auto j = to_json(w);
  CHECK(j["fm_id"] == "LQ");
  CHECK(j["criteria"]["user"].get<double>() == 0.8);
  CHECK(j["history"].size() == 2);

  weights::Criteria none{0.71, std::nullopt, std::nullopt};
  CHECK(criteria_from_json(to_json(none)) == none);
  CHECK_THROWS_AS(criteria_from_json(Json{{"panel", "high"}}), ProtocolError);
  CHECK_THROWS_AS(criteria_from_json(Json::array()), ProtocolError);
}
