#pragma once

// Operator session state machine. Transitions are pure: an illegal
// (phase, event) pair is rejected and the state comes back unchanged.

#include <optional>
#include <string>
#include <string_view>

#include "klafate/backend/protocol.hpp"

namespace klafate::backend {

enum class Phase { FirstRun, Monitor, AwaitAck, AwaitResolution, AwaitRating, AwaitReport };
inline constexpr Phase kAllPhases[] = {Phase::FirstRun,        Phase::Monitor,
                                       Phase::AwaitAck,        Phase::AwaitResolution,
                                       Phase::AwaitRating,     Phase::AwaitReport};

std::string_view phase_name(Phase p);

// Wall-clock seconds of the handshake milestones of one episode.
struct LatencyProbes {
  std::optional<double> detect_ts;
  std::optional<double> publish_ts;
  std::optional<double> ack_ts;
  std::optional<double> display_ts;
  std::optional<double> close_ts;

  bool operator==(const LatencyProbes&) const = default;
};

struct SessionState {
  Phase phase = Phase::FirstRun;
  std::optional<AssessmentMessage> current;
  std::uint64_t episodes = 0;
  LatencyProbes probes;

  bool operator==(const SessionState&) const = default;
};

// What the owner must do after an accepted transition.
enum class Effect {
  None,
  PublishAssessment, // episode opened
  Acknowledged,      // show first pair, or ask for a report when there is none
  Advanced,          // pair cursor moved
  RequestRating,     // fault solved
  RequestReport,     // pairs exhausted
  CloseSolved,       // rating received (stars optional): weight update with w_K = 1
  CloseReported,     // report received: weight update with w_K = 0
};

struct Transition {
  bool accepted = false;
  std::string error; // set when rejected
  SessionState state;
  Effect effect = Effect::None;
};

Transition begin_monitoring(const SessionState& s);
Transition open_episode(const SessionState& s, AssessmentMessage message, double publish_ts);
Transition handle_user_event(const SessionState& s, const UserEvent& e, double now);

} // namespace klafate::backend
