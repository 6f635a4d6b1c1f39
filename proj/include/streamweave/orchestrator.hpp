#pragma once
// Pipeline wiring: stream source -> segmenter -> decision state -> retrieval
// -> reaction engine, with every observable step appended to one Timeline.
//
// Pipeline is the single sequencer. Drivers feed it source events and
// reaction completions in time order: the virtual driver from a discrete
// event loop, LiveRun from a message channel filled by the wall-clock
// playback thread, the reaction workers and external injections.

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "streamweave/config.hpp"
#include "streamweave/decision.hpp"
#include "streamweave/playback.hpp"
#include "streamweave/reaction.hpp"
#include "streamweave/scenario.hpp"
#include "streamweave/segmenter.hpp"
#include "streamweave/timeline.hpp"

namespace streamweave {

using ClipList = std::vector<std::shared_ptr<const ClipFeature>>;

/// Called at every decision evaluation, before any reaction is triggered.
using EvaluationProbe = std::function<void(const DecisionState& state, const DecisionRecord& rec,
                                           const ClipList& clips)>;
using EventObserver = std::function<void(const TimelineEvent& ev)>;

class Pipeline {
 public:
  /// With a wall clock the reaction engine runs in real time and on_done is
  /// invoked from the worker when a reaction finishes.
  Pipeline(const Scenario& scenario, RunConfig cfg, std::shared_ptr<WallClock> wall = nullptr,
           ReactionEngine::Completion on_done = {});

  void set_observer(EventObserver fn) { observer_ = std::move(fn); }
  void set_probe(EvaluationProbe fn) { probe_ = std::move(fn); }

  void on_question(std::shared_ptr<const Question> q, std::int64_t t_ms);
  void on_frame(std::size_t index, FrameEmbedding frame, std::int64_t t_ms);
  /// Frame lost before reaching the segmenter (wall-clock lag).
  void on_frame_dropped(std::size_t index, std::int64_t nominal_t_ms, std::int64_t t_ms,
                        const std::string& reason);
  void on_reaction_complete(std::uint64_t id, std::int64_t t_ms);
  void on_stream_end(std::int64_t t_ms);
  /// Logs a Failed event for an error raised outside the pipeline stages.
  void on_error(const std::string& stage, const std::string& what, std::int64_t t_ms);

  bool finished() const noexcept { return finished_; }
  bool question_active() const noexcept { return decision_.question() != nullptr; }
  const std::optional<ReactionHandle>& in_flight() const noexcept { return in_flight_; }
  bool blocked() const noexcept { return blocked_; }
  const Timeline& timeline() const noexcept { return timeline_; }
  Timeline take_timeline() { return std::move(timeline_); }
  const DecisionState& decision_state() const noexcept { return decision_; }
  const ClipList& clips() const noexcept { return clips_; }

 private:
  struct QueuedQuestion {
    std::shared_ptr<const Question> q;
  };
  struct QueuedFrame {
    std::size_t index;
    FrameEmbedding frame;
  };
  struct QueuedEnd {};
  using Queued = std::variant<QueuedQuestion, QueuedFrame, QueuedEnd>;

  const TimelineEvent& log(std::int64_t t_ms, EventKind kind, nlohmann::json payload);
  void enqueue(Queued item, std::int64_t t_ms);
  void drain_backlog(std::int64_t t_ms);

  void process_question(std::shared_ptr<const Question> q, std::int64_t t_ms);
  void process_frame(std::size_t index, FrameEmbedding frame, std::int64_t t_ms);
  void process_end(std::int64_t t_ms);
  void handle_clip(const ClipFeature& cf, std::int64_t nominal_t_ms, std::int64_t t_ms);
  void evaluate(std::optional<std::size_t> clip, std::int64_t t_ms);
  void start_reaction(const DecisionRecord& rec, std::int64_t t_ms);
  void maybe_finish(std::int64_t t_ms);

  const Scenario& scenario_;
  RunConfig cfg_;
  RetrievalHead head_;
  SceneSegmenter segmenter_;
  DecisionState decision_;
  ReactionEngine engine_;
  ReactionEngine::Completion on_done_;
  EventObserver observer_;
  EvaluationProbe probe_;

  Timeline timeline_;
  ClipList clips_;
  std::vector<Answer> answers_;
  std::optional<ReactionHandle> in_flight_;
  bool blocked_ = false;
  std::deque<Queued> backlog_;
  std::size_t backlog_frames_ = 0;
  bool ending_ = false;
  bool finished_ = false;
};

struct RunHooks {
  EvaluationProbe probe;
  EventObserver observer;
};

/// Virtual-clock run in cfg.mode. Deterministic for a fixed (scenario, cfg).
Timeline run(const Scenario& scenario, const RunConfig& cfg, const RunHooks& hooks = {});
/// Virtual-clock run with mode forced to serial.
Timeline run_serial_baseline(const Scenario& scenario, const RunConfig& cfg,
                             const RunHooks& hooks = {});

/// Unit pseudo-embedding derived from a stable hash of the text.
Vec pseudo_embedding(const std::string& text, std::size_t dim);

/// Wall-clock run on background threads, controllable while it plays.
class LiveRun {
 public:
  LiveRun(Scenario scenario, RunConfig cfg, EventObserver observer = {});
  ~LiveRun();
  LiveRun(const LiveRun&) = delete;
  LiveRun& operator=(const LiveRun&) = delete;

  void play();
  void pause();
  void resume();
  /// Ends the stream now; StreamEnded follows once in-flight reactions finish.
  void stop();

  /// Queues a question at the current stream time and returns its id.
  /// Throws Error(QuestionAlreadyActive) when one is active or pending.
  std::string inject_question(const std::string& text, std::optional<Vec> embedding = {});

  std::int64_t now_ms() const { return clock_->now_ms(); }
  bool finished() const;
  /// Blocks until StreamEnded was logged.
  void wait();
  bool wait_for(std::chrono::milliseconds timeout);
  Timeline timeline() const;
  const Scenario& scenario() const noexcept { return scenario_; }

 private:
  struct Completed {
    std::uint64_t id;
  };
  struct Injected {
    std::shared_ptr<const Question> q;
  };
  struct Stop {};
  using Message = std::variant<StreamEvent, Completed, Injected, Stop>;

  void post(Message m);
  void sequencer();
  void handle(Message m, std::int64_t now);

  Scenario scenario_;
  RunConfig cfg_;
  std::shared_ptr<WallClock> clock_;
  std::unique_ptr<Pipeline> pipeline_;
  std::unique_ptr<WallPlayback> playback_;

  mutable std::mutex state_mu_;  // guards pipeline_ contents
  std::condition_variable done_cv_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Message> inbox_;
  bool question_pending_ = false;
  std::size_t injected_ = 0;
  bool started_ = false;
  bool stopped_ = false;
  bool closing_ = false;
  std::thread worker_;
};

}  // namespace streamweave
