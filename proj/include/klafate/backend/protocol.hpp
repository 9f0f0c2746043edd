#pragma once

// Wire format shared by the bus, the HTTP gateway, the event log and the
// CLI's JSON output. Field names are documented in docs/protocol.md.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "klafate/error.hpp"
#include "klafate/knowledge.hpp"
#include "klafate/weights.hpp"

namespace klafate::backend {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kTopicAssessment = "klafate/assessment";
inline constexpr std::string_view kTopicStatus = "klafate/status";
inline constexpr std::string_view kTopicEventPrefix = "klafate/event/";

class ProtocolError : public Error {
public:
  using Error::Error;
};

enum class EventKind { Ack, Next, Solved, Rating, Report };
inline constexpr EventKind kAllEventKinds[] = {EventKind::Ack, EventKind::Next, EventKind::Solved,
                                               EventKind::Rating, EventKind::Report};

std::string_view event_kind_name(EventKind k);
EventKind parse_event_kind(std::string_view name); // throws ProtocolError

// Operator event. `stars` is only meaningful for rating (absent = skipped);
// `text` only for report. `ts` is the client's display/submit time.
struct UserEvent {
  EventKind kind = EventKind::Ack;
  std::optional<int> stars;
  std::string text;
  std::optional<double> ts;

  bool operator==(const UserEvent&) const = default;
};

Json to_json(const UserEvent& e);
UserEvent user_event_from_json(const Json& j); // throws ProtocolError
UserEvent parse_user_event(std::string_view text);

// Assessment as published to operators.
struct AssessmentMessage {
  std::uint64_t episode = 0;
  knowledge::Assessment assessment;
  std::vector<std::string> frame;
  std::size_t pair_index = 0;
  double sim_time = 0.0;

  bool operator==(const AssessmentMessage&) const = default;
};

Json to_json(const AssessmentMessage& m);

Json to_json(const weights::Criteria& c);
weights::Criteria criteria_from_json(const Json& j);
Json to_json(const weights::RuleWeight& w);
Json to_json(const weights::WeightBook& book);

std::string dump(const Json& j); // compact, stable

} // namespace klafate::backend
