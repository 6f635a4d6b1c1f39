#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace streamweave {

enum class EventKind {
  FrameArrived,
  FrameDropped,
  ClipEmitted,
  QuestionInserted,
  Decision,
  ReactionStart,
  ReactionEnd,
  AnswerEmitted,
  Silent,
  Suppressed,
  Failed,
  StreamEnded,
};

std::string_view to_string(EventKind kind) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view name) noexcept;

struct TimelineEvent {
  std::uint64_t seq = 0;
  std::int64_t t_ms = 0;
  EventKind kind = EventKind::FrameArrived;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

nlohmann::json event_to_json(const TimelineEvent& ev);
TimelineEvent event_from_json(const nlohmann::json& doc);

/// Ordered event log of one run. append() keeps t_ms non-decreasing by
/// clamping late stamps to the last logged time.
class Timeline {
 public:
  const TimelineEvent& append(std::int64_t t_ms, EventKind kind, nlohmann::json payload = nlohmann::json::object());

  const std::vector<TimelineEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  std::size_t count(EventKind kind) const;
  bool ended() const;

  /// First violated structural invariant (ordering, single StreamEnded,
  /// reaction start/end pairing), or nullopt.
  std::optional<std::string> check_invariants() const;

  nlohmann::json to_json() const;
  static Timeline from_json(const nlohmann::json& doc);

  friend bool operator==(const Timeline&, const Timeline&) = default;

 private:
  std::vector<TimelineEvent> events_;
};

}  // namespace streamweave
