#include "streamweave/orchestrator.hpp"

#include <algorithm>

#include "streamweave/error.hpp"
#include "streamweave/seeding.hpp"

namespace streamweave {

namespace {

using nlohmann::json;

std::shared_ptr<const GeneratorBackend> make_backend(const RunConfig& cfg) {
  const bool allow_silent = !cfg.ablations.no_silent_token;
  if (cfg.reaction.kind == ReactionConfig::Kind::External) {
    return std::make_shared<ExternalGenerator>(cfg.reaction.endpoint, cfg.reaction.timeout_ms,
                                               cfg.reaction.latency, allow_silent);
  }
  return std::make_shared<MockGenerator>(cfg.reaction.silent_margin, cfg.reaction.latency, allow_silent);
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Idle: return "idle";
    case Stage::A: return "A";
    case Stage::B: return "B";
    case Stage::C: return "C";
  }
  return "?";
}

json span_json(std::int64_t s, std::int64_t e) { return json::array({s, e}); }

}  // namespace

Pipeline::Pipeline(const Scenario& scenario, RunConfig cfg, std::shared_ptr<WallClock> wall,
                   ReactionEngine::Completion on_done)
    : scenario_(scenario),
      cfg_(std::move(cfg)),
      head_(cfg_.retrieval_head(scenario.dim)),
      segmenter_(cfg_.segmenter, scenario.frame_period_ms),
      decision_(cfg_.flags()),
      engine_(make_backend(cfg_), std::move(wall)),
      on_done_(std::move(on_done)) {
  cfg_.validate();
}

const TimelineEvent& Pipeline::log(std::int64_t t_ms, EventKind kind, json payload) {
  const TimelineEvent& ev = timeline_.append(t_ms, kind, std::move(payload));
  if (observer_) observer_(ev);
  return ev;
}

void Pipeline::on_question(std::shared_ptr<const Question> q, std::int64_t t_ms) {
  if (blocked_) return enqueue(QueuedQuestion{std::move(q)}, t_ms);
  process_question(std::move(q), t_ms);
}

void Pipeline::on_frame(std::size_t index, FrameEmbedding frame, std::int64_t t_ms) {
  if (blocked_) return enqueue(QueuedFrame{index, std::move(frame)}, t_ms);
  process_frame(index, std::move(frame), t_ms);
}

void Pipeline::on_frame_dropped(std::size_t index, std::int64_t nominal_t_ms, std::int64_t t_ms,
                                const std::string& reason) {
  log(t_ms, EventKind::FrameDropped, {{"frame", index}, {"nominal_t_ms", nominal_t_ms}, {"reason", reason}});
}

void Pipeline::on_error(const std::string& stage, const std::string& what, std::int64_t t_ms) {
  log(t_ms, EventKind::Failed, {{"stage", stage}, {"error", what}});
}

void Pipeline::on_stream_end(std::int64_t t_ms) {
  if (ending_) return;
  if (blocked_) return enqueue(QueuedEnd{}, t_ms);
  process_end(t_ms);
}

void Pipeline::enqueue(Queued item, std::int64_t t_ms) {
  if (auto* f = std::get_if<QueuedFrame>(&item)) {
    if (cfg_.queue_capacity && backlog_frames_ >= *cfg_.queue_capacity) {
      on_frame_dropped(f->index, f->frame.t_ms, t_ms, "queue_full");
      return;
    }
    ++backlog_frames_;
  }
  backlog_.push_back(std::move(item));
}

void Pipeline::drain_backlog(std::int64_t t_ms) {
  while (!blocked_ && !backlog_.empty()) {
    Queued item = std::move(backlog_.front());
    backlog_.pop_front();
    if (auto* q = std::get_if<QueuedQuestion>(&item)) {
      process_question(std::move(q->q), t_ms);
    } else if (auto* f = std::get_if<QueuedFrame>(&item)) {
      --backlog_frames_;
      process_frame(f->index, std::move(f->frame), t_ms);
    } else {
      process_end(t_ms);
    }
  }
}

void Pipeline::process_question(std::shared_ptr<const Question> q, std::int64_t t_ms) {
  try {
    decision_.insert_question(q, t_ms);
  } catch (const Error& e) {
    log(t_ms, EventKind::Failed, {{"stage", "question"}, {"question_id", q ? q->id : ""}, {"error", e.what()}});
    return;
  }
  log(t_ms, EventKind::QuestionInserted,
      {{"question_id", q->id}, {"text", q->text}, {"nominal_t_ms", q->t_ms}});
  evaluate(std::nullopt, t_ms);
  decision_.compact_to_memory();
}

void Pipeline::process_frame(std::size_t index, FrameEmbedding frame, std::int64_t t_ms) {
  const std::int64_t nominal = frame.t_ms;
  log(t_ms, EventKind::FrameArrived, {{"frame", index}, {"nominal_t_ms", nominal}});
  std::optional<ClipFeature> cf;
  try {
    cf = segmenter_.push_frame(std::move(frame));
  } catch (const Error& e) {
    log(t_ms, EventKind::Failed, {{"stage", "segmenter"}, {"frame", index}, {"error", e.what()}});
    return;
  }
  if (cf) handle_clip(*cf, nominal, t_ms);
}

void Pipeline::process_end(std::int64_t t_ms) {
  ending_ = true;
  if (auto cf = segmenter_.finalize()) handle_clip(*cf, scenario_.duration_ms(), t_ms);
  maybe_finish(t_ms);
}

void Pipeline::maybe_finish(std::int64_t t_ms) {
  if (!ending_ || finished_ || in_flight_ || blocked_ || !backlog_.empty()) return;
  log(t_ms, EventKind::StreamEnded,
      {{"duration_ms", scenario_.duration_ms()}, {"clips", clips_.size()}, {"answers", answers_.size()}});
  finished_ = true;
}

void Pipeline::handle_clip(const ClipFeature& cf, std::int64_t nominal_t_ms, std::int64_t t_ms) {
  auto shared = std::make_shared<const ClipFeature>(cf);
  clips_.push_back(shared);
  const Clip& c = cf.clip;
  log(t_ms, EventKind::ClipEmitted,
      {{"clip", c.index},
       {"span_ms", span_json(c.start_ms, c.end_ms)},
       {"frame_count", c.frame_count},
       {"first_frame", c.first_frame},
       {"nominal_t_ms", nominal_t_ms}});
  decision_.ingest_clip(std::move(shared));
  if (!question_active()) return;
  if (in_flight_ && cfg_.ans_at == AnsAt::Completion) {
    log(t_ms, EventKind::Suppressed,
        {{"question_id", decision_.question()->id}, {"clip", c.index}, {"reason", "reaction_in_flight"}});
    return;
  }
  evaluate(c.index, t_ms);
}

void Pipeline::evaluate(std::optional<std::size_t> clip, std::int64_t t_ms) {
  const std::string qid = decision_.question()->id;
  const Stage stage = decision_.stage();
  DecisionRecord rec;
  try {
    rec = evaluate_todo(decision_, cfg_.scorer, t_ms);
  } catch (const Error& e) {
    log(t_ms, EventKind::Failed, {{"stage", "decision"}, {"question_id", qid}, {"error", e.what()}});
    return;
  }
  if (probe_) probe_(decision_, rec, clips_);
  log(t_ms, EventKind::Decision,
      {{"question_id", qid},
       {"clip", clip ? json(*clip) : json(nullptr)},
       {"p_respond", rec.p_respond},
       {"action", rec.respond ? "respond" : "wait"},
       {"stage", stage_name(stage)}});
  if (!rec.respond) return;
  if (in_flight_) {
    log(t_ms, EventKind::Suppressed, {{"question_id", qid}, {"clip", clip ? json(*clip) : json(nullptr)},
                                      {"reason", "coalesced"}});
    return;
  }
  start_reaction(rec, t_ms);
}

void Pipeline::start_reaction(const DecisionRecord& rec, std::int64_t t_ms) {
  ReactionRequest req;
  req.question = std::make_shared<const Question>(*decision_.question());
  req.prior_answers = answers_;
  req.trigger_t_ms = t_ms;
  for (const auto& e : decision_.sequence().elements) {
    if (const auto* m = std::get_if<MemorySegment>(&e)) req.memory_snapshot.push_back(*m);
  }
  std::optional<std::size_t> top1;
  if (!clips_.empty()) {
    try {
      std::vector<Vec> indicators;
      indicators.reserve(clips_.size());
      for (const auto& c : clips_) indicators.push_back(c->indicator);
      const Distribution p = score_clips(rec.todo_embed, indicators, head_);
      req.grounded = select_grounded(p, cfg_.retrieval.policy);
      top1 = p.argmax();
      for (std::size_t i : req.grounded.clip_indices) {
        const Clip& c = clips_[i]->clip;
        req.grounded_clips.push_back({c.index, c.start_ms, c.end_ms, p[i]});
      }
    } catch (const Error& e) {
      log(t_ms, EventKind::Failed,
          {{"stage", "retrieval"}, {"question_id", req.question->id}, {"error", e.what()}});
      return;
    }
  }

  json grounded = json::array();
  for (const auto& g : req.grounded_clips) grounded.push_back(g.clip_index);
  const std::size_t ordinal = answers_.size() + 1;
  const std::string qid = req.question->id;

  ReactionHandle handle = engine_.trigger(std::move(req), on_done_);
  const bool serial = cfg_.mode == RunMode::Serial;
  log(t_ms, EventKind::ReactionStart,
      {{"reaction", handle.id},
       {"question_id", qid},
       {"ordinal", ordinal},
       {"grounded", std::move(grounded)},
       {"top1", top1 ? json(*top1) : json(nullptr)},
       {"p_respond", rec.p_respond},
       {"blocking", serial},
       {"due_t_ms", handle.due_t_ms}});
  in_flight_ = std::move(handle);
  blocked_ = serial;
  if (cfg_.ans_at == AnsAt::Trigger) decision_.record_answer(t_ms);
}

void Pipeline::on_reaction_complete(std::uint64_t id, std::int64_t t_ms) {
  if (!in_flight_ || in_flight_->id != id) return;
  ReactionHandle handle = std::move(*in_flight_);
  in_flight_.reset();
  try {
    Answer a = handle.result.get();
    log(t_ms, EventKind::ReactionEnd, {{"reaction", id}, {"trigger_t_ms", handle.trigger_t_ms}});
    if (a.silent) {
      log(t_ms, EventKind::Silent,
          {{"question_id", a.question_id}, {"reaction", id}, {"trigger_t_ms", handle.trigger_t_ms}});
    } else {
      a.emit_t_ms = t_ms;
      json grounded = a.grounded_indices;
      log(t_ms, EventKind::AnswerEmitted,
          {{"question_id", a.question_id},
           {"reaction", id},
           {"ordinal", a.ordinal},
           {"trigger_t_ms", handle.trigger_t_ms},
           {"text", a.text},
           {"grounded", std::move(grounded)}});
      answers_.push_back(std::move(a));
      if (cfg_.ans_at == AnsAt::Completion) decision_.record_answer(t_ms);
    }
  } catch (const std::exception& e) {
    log(t_ms, EventKind::Failed,
        {{"stage", "reaction"}, {"reaction", id}, {"trigger_t_ms", handle.trigger_t_ms}, {"error", e.what()}});
  }
  blocked_ = false;
  drain_backlog(t_ms);
  maybe_finish(t_ms);
}

namespace {

Timeline run_virtual(const Scenario& scenario, const RunConfig& cfg, const RunHooks& hooks) {
  scenario.validate();
  Pipeline pipe(scenario, cfg);
  if (hooks.probe) pipe.set_probe(hooks.probe);
  if (hooks.observer) pipe.set_observer(hooks.observer);

  std::vector<std::shared_ptr<const Question>> questions;
  for (const auto& q : scenario.questions) questions.push_back(std::make_shared<const Question>(q));

  std::int64_t now = 0;
  VirtualPlayback playback(scenario, [&](const StreamEvent& ev) {
    switch (ev.kind) {
      case StreamEvent::Kind::QuestionInserted:
        pipe.on_question(questions[ev.index], ev.t_ms);
        break;
      case StreamEvent::Kind::FrameArrived:
        pipe.on_frame(ev.index, scenario.frame(ev.index), ev.t_ms);
        break;
      case StreamEvent::Kind::StreamEnded:
        pipe.on_stream_end(ev.t_ms);
        break;
    }
    now = ev.t_ms;
    return true;
  });

  while (!pipe.finished()) {
    const auto next_source = playback.next_event_time();
    const auto& flight = pipe.in_flight();
    if (flight && (!next_source || flight->due_t_ms <= *next_source)) {
      now = std::max(now, flight->due_t_ms);
      pipe.on_reaction_complete(flight->id, now);
    } else if (next_source) {
      playback.tick_to(*next_source);
    } else {
      throw Error(ErrorCode::IncompleteTimeline, "pipeline stalled before StreamEnded");
    }
  }
  return pipe.take_timeline();
}

}  // namespace

Timeline run(const Scenario& scenario, const RunConfig& cfg, const RunHooks& hooks) {
  if (cfg.clock != ClockKind::Virtual) {
    RunConfig virt = cfg;
    virt.clock = ClockKind::Virtual;
    return run_virtual(scenario, virt, hooks);
  }
  return run_virtual(scenario, cfg, hooks);
}

Timeline run_serial_baseline(const Scenario& scenario, const RunConfig& cfg, const RunHooks& hooks) {
  RunConfig serial = cfg;
  serial.mode = RunMode::Serial;
  return run(scenario, serial, hooks);
}

Vec pseudo_embedding(const std::string& text, std::size_t dim) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return seeded_direction(h, dim);
}

LiveRun::LiveRun(Scenario scenario, RunConfig cfg, EventObserver observer)
    : scenario_(std::move(scenario)),
      cfg_(std::move(cfg)),
      clock_(std::make_shared<WallClock>(cfg_.wall_speed)) {
  scenario_.validate();
  cfg_.clock = ClockKind::Wall;
  clock_->pause();
  pipeline_ = std::make_unique<Pipeline>(scenario_, cfg_, clock_,
                                         [this](std::uint64_t id) { post(Completed{id}); });
  pipeline_->set_observer([this, observer = std::move(observer)](const TimelineEvent& ev) {
    if (observer) observer(ev);
    if (ev.kind == EventKind::QuestionInserted ||
        (ev.kind == EventKind::Failed && ev.payload.value("stage", "") == "question")) {
      std::lock_guard lock(mu_);
      question_pending_ = false;
    }
  });
  playback_ = std::make_unique<WallPlayback>(
      scenario_,
      [this](const StreamEvent& ev) {
        post(ev);
        return true;
      },
      clock_);
  worker_ = std::thread([this] { sequencer(); });
}

LiveRun::~LiveRun() {
  playback_->stop();
  playback_->join();
  {
    std::lock_guard lock(mu_);
    closing_ = true;
    inbox_.push_back(Stop{});
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void LiveRun::post(Message m) {
  {
    std::lock_guard lock(mu_);
    inbox_.push_back(std::move(m));
  }
  cv_.notify_all();
}

void LiveRun::play() {
  {
    std::lock_guard lock(mu_);
    if (started_) return;
    started_ = true;
  }
  clock_->resume();
  playback_->start();
}

void LiveRun::pause() {
  clock_->pause();
  playback_->notify();
}

void LiveRun::resume() {
  clock_->resume();
  playback_->notify();
}

void LiveRun::stop() {
  playback_->stop();
  {
    std::lock_guard lock(mu_);
    if (stopped_) return;
    stopped_ = true;
  }
  post(Stop{});
}

std::string LiveRun::inject_question(const std::string& text, std::optional<Vec> embedding) {
  Vec vec = embedding ? l2_normalize(*embedding) : pseudo_embedding(text, scenario_.dim);
  if (vec.size() != scenario_.dim) {
    throw Error(ErrorCode::DimensionMismatch, "embedding must have dim " + std::to_string(scenario_.dim));
  }
  auto q = std::make_shared<Question>();
  {
    std::lock_guard state(state_mu_);
    std::lock_guard lock(mu_);
    if (pipeline_->question_active() || question_pending_) {
      throw Error(ErrorCode::QuestionAlreadyActive, "a question is already active");
    }
    question_pending_ = true;
    q->id = "live-" + std::to_string(++injected_);
  }
  q->text = text;
  q->t_ms = clock_->now_ms();
  q->embedding = std::move(vec);
  std::string id = q->id;
  post(Injected{std::move(q)});
  return id;
}

void LiveRun::sequencer() {
  std::int64_t last = 0;
  for (;;) {
    Message m;
    bool closing = false;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return !inbox_.empty(); });
      m = std::move(inbox_.front());
      inbox_.pop_front();
      closing = closing_;
    }
    std::lock_guard state(state_mu_);
    if (!pipeline_->finished()) {
      last = std::max(last, clock_->now_ms());
      handle(std::move(m), last);
    }
    if (pipeline_->finished()) {
      done_cv_.notify_all();
      if (closing) break;
    }
  }
}

void LiveRun::handle(Message m, std::int64_t now) {
  try {
    if (const auto* ev = std::get_if<StreamEvent>(&m)) {
      switch (ev->kind) {
        case StreamEvent::Kind::QuestionInserted:
          pipeline_->on_question(std::make_shared<const Question>(scenario_.questions[ev->index]), now);
          break;
        case StreamEvent::Kind::FrameArrived: {
          const std::int64_t nominal = scenario_.frame_time(ev->index);
          if (cfg_.drop_after_ms && now - nominal > *cfg_.drop_after_ms) {
            pipeline_->on_frame_dropped(ev->index, nominal, now, "late");
          } else {
            pipeline_->on_frame(ev->index, scenario_.frame(ev->index), now);
          }
          break;
        }
        case StreamEvent::Kind::StreamEnded:
          pipeline_->on_stream_end(now);
          break;
      }
    } else if (const auto* c = std::get_if<Completed>(&m)) {
      pipeline_->on_reaction_complete(c->id, now);
    } else if (auto* inj = std::get_if<Injected>(&m)) {
      pipeline_->on_question(std::move(inj->q), now);
    } else {
      pipeline_->on_stream_end(now);
    }
  } catch (const std::exception& e) {
    pipeline_->on_error("pipeline", e.what(), now);
  }
}

bool LiveRun::finished() const {
  std::lock_guard lock(state_mu_);
  return pipeline_->finished();
}

void LiveRun::wait() {
  std::unique_lock lock(state_mu_);
  done_cv_.wait(lock, [this] { return pipeline_->finished(); });
}

bool LiveRun::wait_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(state_mu_);
  return done_cv_.wait_for(lock, timeout, [this] { return pipeline_->finished(); });
}

Timeline LiveRun::timeline() const {
  std::lock_guard lock(state_mu_);
  return pipeline_->timeline();
}

}  // namespace streamweave
