#pragma once
// Scenario playback under a virtual or wall clock. Events are delivered in
// (t_ms, kind) order: a question is delivered before a frame carrying the
// same timestamp, and StreamEnded closes the stream exactly once.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "streamweave/scenario.hpp"

namespace streamweave {

enum class ClockKind { Virtual, Wall };

struct StreamEvent {
  enum class Kind { QuestionInserted, FrameArrived, StreamEnded };
  Kind kind = Kind::FrameArrived;
  std::int64_t t_ms = 0;
  std::size_t index = 0;  // frame index or question index
};

/// Returns false once the consumer has gone away.
using EventSink = std::function<bool(const StreamEvent&)>;

/// Ordered schedule of every source event in a scenario.
std::vector<StreamEvent> build_schedule(const Scenario& s);

class VirtualClock {
 public:
  std::int64_t now_ms() const noexcept { return now_; }
  /// Monotonic: moving backwards is ignored.
  void advance_to(std::int64_t t_ms) noexcept {
    if (t_ms > now_) now_ = t_ms;
  }

 private:
  std::int64_t now_ = 0;
};

/// Pausable stream clock backed by std::chrono::steady_clock. speed scales
/// stream time relative to real time (2.0 plays twice as fast).
class WallClock {
 public:
  explicit WallClock(double speed = 1.0);

  std::int64_t now_ms() const;
  void pause();
  void resume();
  bool paused() const;
  double speed() const noexcept { return speed_; }
  /// Real duration corresponding to a stream-time interval.
  std::chrono::nanoseconds to_real(std::int64_t stream_ms) const;

 private:
  using steady = std::chrono::steady_clock;
  double speed_;
  mutable std::mutex mu_;
  steady::time_point origin_;
  std::optional<steady::time_point> paused_at_;
  steady::duration paused_total_{0};
};

class VirtualPlayback {
 public:
  VirtualPlayback(const Scenario& s, EventSink sink);

  /// Delivers every pending event with t_ms <= t and advances the clock.
  /// Throws Error(SinkClosed) when the sink refuses an event.
  void tick_to(std::int64_t t_ms);
  std::optional<std::int64_t> next_event_time() const;
  bool ended() const noexcept { return cursor_ == schedule_.size(); }
  const VirtualClock& clock() const noexcept { return clock_; }

 private:
  std::vector<StreamEvent> schedule_;
  std::size_t cursor_ = 0;
  EventSink sink_;
  VirtualClock clock_;
};

/// Plays a scenario on its own thread against a WallClock.
class WallPlayback {
 public:
  WallPlayback(const Scenario& s, EventSink sink, std::shared_ptr<WallClock> clock);
  ~WallPlayback();
  WallPlayback(const WallPlayback&) = delete;
  WallPlayback& operator=(const WallPlayback&) = delete;

  void start();
  /// Stops early; StreamEnded is not delivered after stop().
  void stop();
  void join();
  /// Wake the thread after the clock was paused or resumed.
  void notify();
  bool finished() const noexcept { return finished_; }
  /// True when the consumer refused an event.
  bool sink_closed() const noexcept { return sink_closed_; }

 private:
  void loop();

  std::vector<StreamEvent> schedule_;
  EventSink sink_;
  std::shared_ptr<WallClock> clock_;
  std::thread thread_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> finished_{false};
  std::atomic<bool> sink_closed_{false};
};

}  // namespace streamweave
