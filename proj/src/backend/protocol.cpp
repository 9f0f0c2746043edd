#include "klafate/backend/protocol.hpp"

namespace klafate::backend {

std::string_view event_kind_name(EventKind k) {
  switch (k) {
  case EventKind::Ack: return "ack";
  case EventKind::Next: return "next";
  case EventKind::Solved: return "solved";
  case EventKind::Rating: return "rating";
  case EventKind::Report: return "report";
  }
  return "";
}

EventKind parse_event_kind(std::string_view name) {
  for (EventKind k : kAllEventKinds) {
    if (event_kind_name(k) == name) return k;
  }
  throw ProtocolError("unknown event kind '" + std::string(name) + "'");
}

Json to_json(const UserEvent& e) {
  Json j;
  j["kind"] = event_kind_name(e.kind);
  if (e.kind == EventKind::Rating) j["stars"] = e.stars ? Json(*e.stars) : Json(nullptr);
  if (e.kind == EventKind::Report) j["text"] = e.text;
  if (e.ts) j["ts"] = *e.ts;
  return j;
}

UserEvent user_event_from_json(const Json& j) {
  if (!j.is_object()) throw ProtocolError("event must be a JSON object");
  if (!j.contains("kind") || !j["kind"].is_string()) {
    throw ProtocolError("event needs a string field 'kind'");
  }
  UserEvent e;
  e.kind = parse_event_kind(j["kind"].get<std::string>());
  if (j.contains("stars") && !j["stars"].is_null()) {
    if (e.kind != EventKind::Rating) throw ProtocolError("'stars' is only valid on rating");
    if (!j["stars"].is_number_integer()) throw ProtocolError("'stars' must be an integer");
    const int stars = j["stars"].get<int>();
    if (stars < 1 || stars > 5) throw ProtocolError("'stars' must be 1..5");
    e.stars = stars;
  }
  if (j.contains("text")) {
    if (e.kind != EventKind::Report) throw ProtocolError("'text' is only valid on report");
    if (!j["text"].is_string()) throw ProtocolError("'text' must be a string");
    e.text = j["text"].get<std::string>();
  }
  if (j.contains("ts") && !j["ts"].is_null()) {
    if (!j["ts"].is_number()) throw ProtocolError("'ts' must be a number");
    e.ts = j["ts"].get<double>();
  }
  return e;
}

UserEvent parse_user_event(std::string_view text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ProtocolError("event is not valid JSON");
  return user_event_from_json(j);
}

Json to_json(const AssessmentMessage& m) {
  const auto& a = m.assessment;
  Json j;
  j["episode"] = m.episode;
  j["fm_id"] = a.fm_id;
  j["label"] = a.label;
  j["effect"] = a.effect;
  Json pairs = Json::array();
  for (const auto& p : a.pairs) {
    pairs.push_back({{"component_fm", p.component_fm},
                     {"cause", p.cause},
                     {"recommendation", p.recommendation}});
  }
  j["pairs"] = std::move(pairs);
  j["pair_index"] = m.pair_index;
  j["frame"] = m.frame;
  if (a.evidence) {
    j["w_r"] = a.w_r;
    j["evidence"] = a.evidence->as_array();
    j["uncertainty"] = a.uncertainty;
  } else {
    j["w_r"] = nullptr;
    j["evidence"] = Json::array();
    j["uncertainty"] = nullptr;
  }
  j["detected_at"] = a.detected_at;
  j["published_at"] = a.published_at;
  j["sim_time"] = m.sim_time;
  return j;
}

Json to_json(const weights::Criteria& c) {
  Json j;
  j["panel"] = c.panel ? Json(*c.panel) : Json(nullptr);
  j["kpi"] = c.kpi ? Json(*c.kpi) : Json(nullptr);
  j["user"] = c.user ? Json(*c.user) : Json(nullptr);
  return j;
}

weights::Criteria criteria_from_json(const Json& j) {
  if (!j.is_object()) throw ProtocolError("criteria must be an object");
  auto field = [&](const char* name) -> std::optional<double> {
    if (!j.contains(name) || j[name].is_null()) return std::nullopt;
    if (!j[name].is_number()) throw ProtocolError(std::string("criterion '") + name + "' must be a number");
    return j[name].get<double>();
  };
  return {field("panel"), field("kpi"), field("user")};
}

Json to_json(const weights::RuleWeight& w) {
  Json j;
  j["fm_id"] = w.rule_id;
  j["w_r"] = w.current;
  j["w_ra"] = w.accumulated;
  j["criteria"] = to_json(w.criteria);
  j["history"] = Json::array();
  for (const auto& h : w.history) j["history"].push_back({{"ts", h.timestamp}, {"w_r", h.value}});
  return j;
}

Json to_json(const weights::WeightBook& book) {
  Json j = Json::object();
  for (const auto& [id, w] : book.all()) j[id] = to_json(w);
  return j;
}

std::string dump(const Json& j) { return j.dump(); }

} // namespace klafate::backend
