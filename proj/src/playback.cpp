#include "streamweave/playback.hpp"

#include <algorithm>

namespace streamweave {

std::vector<StreamEvent> build_schedule(const Scenario& s) {
  std::vector<StreamEvent> events;
  const std::size_t frames = s.frame_count();
  events.reserve(frames + s.questions.size() + 1);
  for (std::size_t i = 0; i < s.questions.size(); ++i) {
    events.push_back({StreamEvent::Kind::QuestionInserted, s.questions[i].t_ms, i});
  }
  for (std::size_t i = 0; i < frames; ++i) {
    events.push_back({StreamEvent::Kind::FrameArrived, s.frame_time(i), i});
  }
  std::stable_sort(events.begin(), events.end(), [](const StreamEvent& a, const StreamEvent& b) {
    if (a.t_ms != b.t_ms) return a.t_ms < b.t_ms;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  events.push_back({StreamEvent::Kind::StreamEnded, s.duration_ms(), 0});
  return events;
}

WallClock::WallClock(double speed) : speed_(speed > 0.0 ? speed : 1.0), origin_(steady::now()) {}

std::int64_t WallClock::now_ms() const {
  std::lock_guard lock(mu_);
  const auto at = paused_at_ ? *paused_at_ : steady::now();
  const auto elapsed = at - origin_ - paused_total_;
  const double ms = std::chrono::duration<double, std::milli>(elapsed).count() * speed_;
  return static_cast<std::int64_t>(ms);
}

void WallClock::pause() {
  std::lock_guard lock(mu_);
  if (!paused_at_) paused_at_ = steady::now();
}

void WallClock::resume() {
  std::lock_guard lock(mu_);
  if (paused_at_) {
    paused_total_ += steady::now() - *paused_at_;
    paused_at_.reset();
  }
}

bool WallClock::paused() const {
  std::lock_guard lock(mu_);
  return paused_at_.has_value();
}

std::chrono::nanoseconds WallClock::to_real(std::int64_t stream_ms) const {
  return std::chrono::nanoseconds(
      static_cast<std::int64_t>(static_cast<double>(stream_ms) * 1e6 / speed_));
}

VirtualPlayback::VirtualPlayback(const Scenario& s, EventSink sink)
    : schedule_(build_schedule(s)), sink_(std::move(sink)) {}

void VirtualPlayback::tick_to(std::int64_t t_ms) {
  clock_.advance_to(t_ms);
  while (cursor_ < schedule_.size() && schedule_[cursor_].t_ms <= clock_.now_ms()) {
    const StreamEvent& ev = schedule_[cursor_++];
    if (!sink_(ev)) throw Error(ErrorCode::SinkClosed, "consumer gone at t=" + std::to_string(ev.t_ms));
  }
}

std::optional<std::int64_t> VirtualPlayback::next_event_time() const {
  if (cursor_ == schedule_.size()) return std::nullopt;
  return schedule_[cursor_].t_ms;
}

WallPlayback::WallPlayback(const Scenario& s, EventSink sink, std::shared_ptr<WallClock> clock)
    : schedule_(build_schedule(s)), sink_(std::move(sink)), clock_(std::move(clock)) {}

WallPlayback::~WallPlayback() {
  stop();
  join();
}

void WallPlayback::start() { thread_ = std::thread([this] { loop(); }); }

void WallPlayback::stop() {
  stop_ = true;
  notify();
}

void WallPlayback::join() {
  if (thread_.joinable()) thread_.join();
}

void WallPlayback::notify() {
  std::lock_guard lock(mu_);
  cv_.notify_all();
}

void WallPlayback::loop() {
  for (const StreamEvent& ev : schedule_) {
    std::unique_lock lock(mu_);
    for (;;) {
      if (stop_) {
        finished_ = true;
        return;
      }
      if (!clock_->paused()) {
        const std::int64_t wait = ev.t_ms - clock_->now_ms();
        if (wait <= 0) break;
        cv_.wait_for(lock, std::min(clock_->to_real(wait), std::chrono::nanoseconds(50'000'000)));
      } else {
        cv_.wait_for(lock, std::chrono::milliseconds(20));
      }
    }
    lock.unlock();
    if (!sink_(ev)) {
      sink_closed_ = true;
      break;
    }
  }
  finished_ = true;
}

}  // namespace streamweave
