#pragma once
// Reaction stage: turns a respond decision into an answer (or a silent
// outcome) on a separate execution context. trigger() never waits for the
// generator; the caller collects the result from the handle.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "streamweave/decision.hpp"
#include "streamweave/playback.hpp"
#include "streamweave/retrieval.hpp"

namespace streamweave {

struct Answer {
  std::string question_id;
  std::size_t ordinal = 1;  // k for the k-th non-silent answer
  std::int64_t trigger_t_ms = 0;
  std::int64_t emit_t_ms = 0;
  std::string text;
  bool silent = false;
  std::vector<std::size_t> grounded_indices;
};

struct GroundedClip {
  std::size_t clip_index = 0;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  double p = 0.0;
};

struct ReactionRequest {
  std::shared_ptr<const Question> question;
  std::vector<Answer> prior_answers;  // sorted by trigger time
  GroundedSelection grounded;
  std::vector<GroundedClip> grounded_clips;
  std::vector<MemorySegment> memory_snapshot;
  std::int64_t trigger_t_ms = 0;
};

struct LatencyModel {
  enum class Kind { Fixed, Uniform };
  Kind kind = Kind::Fixed;
  std::int64_t fixed_ms = 2000;
  std::int64_t lo_ms = 0;
  std::int64_t hi_ms = 0;
  std::uint64_t seed = 0;

  /// Latency of the seq-th reaction of a run; deterministic per (seed, seq).
  std::int64_t sample(std::uint64_t seq) const;
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual Answer generate(const ReactionRequest& req) const = 0;
  /// Modeled generation latency; the virtual clock schedules completion
  /// this long after the trigger.
  virtual std::int64_t latency_ms(std::uint64_t seq) const = 0;
};

/// Template answer; silent when the strongest grounded clip is not clearly
/// preferred: max P < silent_margin / N.
Answer mock_generate(const ReactionRequest& req, double silent_margin = 2.0, bool allow_silent = true);

class MockGenerator final : public GeneratorBackend {
 public:
  MockGenerator(double silent_margin, LatencyModel latency, bool allow_silent = true)
      : silent_margin_(silent_margin), latency_(latency), allow_silent_(allow_silent) {}

  Answer generate(const ReactionRequest& req) const override {
    return mock_generate(req, silent_margin_, allow_silent_);
  }
  std::int64_t latency_ms(std::uint64_t seq) const override { return latency_.sample(seq); }

 private:
  double silent_margin_;
  LatencyModel latency_;
  bool allow_silent_;
};

/// Wire format of POST /generate.
nlohmann::json request_to_wire(const ReactionRequest& req);

Answer external_generate(const ReactionRequest& req, const std::string& endpoint, int timeout_ms);

class ExternalGenerator final : public GeneratorBackend {
 public:
  ExternalGenerator(std::string endpoint, int timeout_ms, LatencyModel modeled, bool allow_silent = true)
      : endpoint_(std::move(endpoint)),
        timeout_ms_(timeout_ms),
        modeled_(modeled),
        allow_silent_(allow_silent) {}

  Answer generate(const ReactionRequest& req) const override;
  std::int64_t latency_ms(std::uint64_t seq) const override { return modeled_.sample(seq); }

 private:
  std::string endpoint_;
  int timeout_ms_;
  LatencyModel modeled_;
  bool allow_silent_;
};

struct ReactionHandle {
  std::uint64_t id = 0;
  std::int64_t trigger_t_ms = 0;
  std::int64_t due_t_ms = 0;  // modeled completion time
  std::shared_future<Answer> result;

  bool ready() const {
    return result.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
  }
};

class ReactionEngine {
 public:
  using Completion = std::function<void(std::uint64_t id)>;

  /// With a wall clock the worker also waits out the modeled latency in real
  /// time and stamps emit_t_ms from the clock.
  explicit ReactionEngine(std::shared_ptr<const GeneratorBackend> backend,
                          std::shared_ptr<WallClock> wall = nullptr);

  /// Returns immediately. on_done runs on the worker once the answer (or
  /// failure) is available.
  ReactionHandle trigger(ReactionRequest req, Completion on_done = {});

 private:
  std::shared_ptr<const GeneratorBackend> backend_;
  std::shared_ptr<WallClock> wall_;
  std::uint64_t next_id_ = 0;
};

}  // namespace streamweave
