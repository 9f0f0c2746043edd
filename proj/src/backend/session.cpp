#include "klafate/backend/session.hpp"

namespace klafate::backend {

std::string_view phase_name(Phase p) {
  switch (p) {
  case Phase::FirstRun: return "FIRST_RUN";
  case Phase::Monitor: return "MONITOR";
  case Phase::AwaitAck: return "AWAIT_ACK";
  case Phase::AwaitResolution: return "AWAIT_RESOLUTION";
  case Phase::AwaitRating: return "AWAIT_RATING";
  case Phase::AwaitReport: return "AWAIT_REPORT";
  }
  return "";
}

namespace {

Transition reject(const SessionState& s, std::string why) {
  return {false, std::move(why), s, Effect::None};
}

Transition reject_event(const SessionState& s, EventKind k) {
  return reject(s, "event '" + std::string(event_kind_name(k)) + "' is not valid in phase " +
                       std::string(phase_name(s.phase)));
}

Transition accept(SessionState s, Effect effect) { return {true, {}, std::move(s), effect}; }

} // namespace

Transition begin_monitoring(const SessionState& s) {
  if (s.phase != Phase::FirstRun) return reject(s, "monitoring already started");
  SessionState next = s;
  next.phase = Phase::Monitor;
  return accept(std::move(next), Effect::None);
}

Transition open_episode(const SessionState& s, AssessmentMessage message, double publish_ts) {
  if (s.phase != Phase::Monitor) {
    return reject(s, "cannot open an episode in phase " + std::string(phase_name(s.phase)));
  }
  if (!message.assessment.is_fault()) return reject(s, "assessment carries no fault");
  SessionState next = s;
  next.phase = Phase::AwaitAck;
  next.episodes = s.episodes + 1;
  message.episode = next.episodes;
  message.pair_index = 0;
  message.assessment.published_at = publish_ts;
  next.current = std::move(message);
  next.probes = {};
  next.probes.detect_ts = next.current->assessment.detected_at;
  next.probes.publish_ts = publish_ts;
  return accept(std::move(next), Effect::PublishAssessment);
}

Transition handle_user_event(const SessionState& s, const UserEvent& e, double now) {
  SessionState next = s;
  switch (s.phase) {
  case Phase::AwaitAck:
    if (e.kind != EventKind::Ack) break;
    next.probes.ack_ts = now;
    if (e.ts) next.probes.display_ts = *e.ts;
    next.phase = s.current->assessment.pairs.empty() ? Phase::AwaitReport : Phase::AwaitResolution;
    return accept(std::move(next), Effect::Acknowledged);

  case Phase::AwaitResolution:
    if (e.kind == EventKind::Next) {
      auto& idx = next.current->pair_index;
      ++idx;
      if (idx >= next.current->assessment.pairs.size()) {
        idx = next.current->assessment.pairs.size();
        next.phase = Phase::AwaitReport;
        return accept(std::move(next), Effect::RequestReport);
      }
      return accept(std::move(next), Effect::Advanced);
    }
    if (e.kind == EventKind::Solved) {
      next.phase = Phase::AwaitRating;
      return accept(std::move(next), Effect::RequestRating);
    }
    break;

  case Phase::AwaitRating:
    if (e.kind != EventKind::Rating) break;
    next.phase = Phase::Monitor;
    next.probes.close_ts = now;
    return accept(std::move(next), Effect::CloseSolved);

  case Phase::AwaitReport:
    if (e.kind != EventKind::Report) break;
    next.phase = Phase::Monitor;
    next.probes.close_ts = now;
    return accept(std::move(next), Effect::CloseReported);

  case Phase::FirstRun:
  case Phase::Monitor:
    break;
  }
  return reject_event(s, e.kind);
}

} // namespace klafate::backend
