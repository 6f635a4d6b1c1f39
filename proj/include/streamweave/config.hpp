#pragma once
// Run configuration file (JSON). Every key is optional; missing keys keep the
// defaults below.
//
//   mode            "async" | "serial"
//   clock           "virtual" | "wall"
//   seed            integer
//   segmenter       {mode, threshold, exclusion_window, min_frames, max_frames, uniform_frames}
//   scorer          {kind: oracle|heuristic|learned|external, threshold, gain, offset,
//                    weights, bias, params_file, endpoint, timeout_ms}
//   retrieval       {policy: threshold|top_k, alpha, k, cap, temperature, params_file}
//   reaction        {kind: mock|external, silent_margin, latency: {fixed_ms} | {uniform_ms: [lo, hi]},
//                    endpoint, timeout_ms}
//   ablations       {no_ans_token, no_todo_token, no_silent_token}
//   ans_at          "completion" | "trigger"
//   queue_capacity  integer, or null for an unbounded serial queue
//   drop_after_ms   wall clock only: frames handled later than this are dropped
//   wall_speed      wall clock only: stream ms per real ms

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "streamweave/decision.hpp"
#include "streamweave/playback.hpp"
#include "streamweave/reaction.hpp"
#include "streamweave/retrieval.hpp"
#include "streamweave/segmenter.hpp"

namespace streamweave {

enum class RunMode { Async, Serial };
enum class AnsAt { Completion, Trigger };

struct RetrievalConfig {
  SelectionPolicy policy;
  std::optional<double> temperature;  // overrides the head's temperature
  std::optional<RetrievalHead> head;  // identity projection when absent
};

struct ReactionConfig {
  enum class Kind { Mock, External };
  Kind kind = Kind::Mock;
  double silent_margin = 2.0;
  LatencyModel latency;
  std::string endpoint;
  int timeout_ms = 1000;
};

struct Ablations {
  bool no_ans_token = false;
  bool no_todo_token = false;
  bool no_silent_token = false;
};

struct RunConfig {
  RunMode mode = RunMode::Async;
  ClockKind clock = ClockKind::Virtual;
  std::uint64_t seed = 0;
  SegmenterConfig segmenter;
  DecisionScorer scorer;
  RetrievalConfig retrieval;
  ReactionConfig reaction;
  Ablations ablations;
  AnsAt ans_at = AnsAt::Completion;
  std::optional<std::size_t> queue_capacity;
  std::optional<std::int64_t> drop_after_ms;
  double wall_speed = 1.0;

  SequenceFlags flags() const { return {ablations.no_ans_token, ablations.no_todo_token}; }
  /// Head used for a stream of the given dimension.
  RetrievalHead retrieval_head(std::size_t dim) const;
  /// Throws Error(InvalidConfig).
  void validate() const;
};

/// params_file entries are resolved relative to base_dir and loaded eagerly.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Parameter files written by the trainers: {"kind", "params", "loss_curve", ...}.
/// A bare head object is accepted as well.
DecisionHead load_decision_params(const std::filesystem::path& path);
RetrievalHead load_retrieval_params(const std::filesystem::path& path);

}  // namespace streamweave
