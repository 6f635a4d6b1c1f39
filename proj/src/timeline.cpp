#include "streamweave/timeline.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "streamweave/error.hpp"

namespace streamweave {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 12> kNames{{
    {EventKind::FrameArrived, "FrameArrived"},
    {EventKind::FrameDropped, "FrameDropped"},
    {EventKind::ClipEmitted, "ClipEmitted"},
    {EventKind::QuestionInserted, "QuestionInserted"},
    {EventKind::Decision, "Decision"},
    {EventKind::ReactionStart, "ReactionStart"},
    {EventKind::ReactionEnd, "ReactionEnd"},
    {EventKind::AnswerEmitted, "AnswerEmitted"},
    {EventKind::Silent, "Silent"},
    {EventKind::Suppressed, "Suppressed"},
    {EventKind::Failed, "Failed"},
    {EventKind::StreamEnded, "StreamEnded"},
}};

bool valid_id(const nlohmann::json& payload) {
  const auto it = payload.find("reaction");
  return it != payload.end() && it->is_number_integer() && it->get<std::int64_t>() >= 0;
}

}  // namespace

std::string_view to_string(EventKind kind) noexcept {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "Unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view name) noexcept {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

nlohmann::json event_to_json(const TimelineEvent& ev) {
  return {{"seq", ev.seq}, {"t_ms", ev.t_ms}, {"kind", to_string(ev.kind)}, {"payload", ev.payload}};
}

TimelineEvent event_from_json(const nlohmann::json& doc) {
  try {
    TimelineEvent ev;
    ev.seq = doc.at("seq").get<std::uint64_t>();
    ev.t_ms = doc.at("t_ms").get<std::int64_t>();
    const auto name = doc.at("kind").get<std::string>();
    const auto kind = parse_event_kind(name);
    if (!kind) throw Error(ErrorCode::SchemaError, "unknown event kind '" + name + "'");
    ev.kind = *kind;
    ev.payload = doc.value("payload", nlohmann::json::object());
    return ev;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("timeline event: ") + e.what());
  }
}

const TimelineEvent& Timeline::append(std::int64_t t_ms, EventKind kind, nlohmann::json payload) {
  if (!events_.empty()) t_ms = std::max(t_ms, events_.back().t_ms);
  events_.push_back({events_.size(), t_ms, kind, std::move(payload)});
  return events_.back();
}

std::size_t Timeline::count(EventKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      events_.begin(), events_.end(), [kind](const TimelineEvent& e) { return e.kind == kind; }));
}

bool Timeline::ended() const { return count(EventKind::StreamEnded) == 1; }

std::optional<std::string> Timeline::check_invariants() const {
  std::map<std::uint64_t, int> open;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const auto& e = events_[i];
    if (e.seq != i) return "sequence numbers are not dense";
    if (i > 0 && e.t_ms < events_[i - 1].t_ms) return "t_ms decreases at seq " + std::to_string(i);
    const bool start = e.kind == EventKind::ReactionStart;
    const bool end = e.kind == EventKind::ReactionEnd || (e.kind == EventKind::Failed && e.payload.contains("reaction"));
    if ((start || end) && !valid_id(e.payload)) {
      return "reaction event without an id at seq " + std::to_string(i);
    }
    if (start) {
      open[e.payload.at("reaction").get<std::uint64_t>()] += 1;
    } else if (end) {
      const auto id = e.payload.at("reaction").get<std::uint64_t>();
      if (open[id] != 1) return "reaction " + std::to_string(id) + " closed without a single start";
      open[id] = 0;
    }
  }
  if (count(EventKind::StreamEnded) != 1) return "expected exactly one StreamEnded";
  for (const auto& [id, n] : open) {
    if (n != 0) return "reaction " + std::to_string(id) + " never ended";
  }
  return std::nullopt;
}

nlohmann::json Timeline::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : events_) arr.push_back(event_to_json(e));
  return arr;
}

Timeline Timeline::from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::SchemaError, "timeline: expected an array");
  Timeline tl;
  for (const auto& item : doc) tl.events_.push_back(event_from_json(item));
  return tl;
}

}  // namespace streamweave
