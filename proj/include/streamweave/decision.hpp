#pragma once
// Decision stage: the interleaved sequence of memory segments, raw clip
// features, the question, answer markers and the trailing TODO marker, plus
// the respond/wait scorer evaluated at that marker.
//
// Sequence stages (M = memory segment, F = raw clip, Q = question):
//   idle  F* TODO                        no question yet
//   A     F* Q TODO                      question just inserted
//   B     M? Q F* TODO                   pre-question clips pooled
//   C     M? Q (M? ANS)+ F* TODO         k answers recorded
// With the answer-marker ablation the ANS markers are dropped (pooling still
// happens); with the TODO ablation the trailing marker is absent.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "streamweave/scenario.hpp"
#include "streamweave/segmenter.hpp"

namespace streamweave {

struct MemorySegment {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  Vec vec;
};

struct ClipRef {
  std::shared_ptr<const ClipFeature> clip;
};

struct QuestionRef {
  std::shared_ptr<const Question> question;
};

struct AnsMarker {
  std::int64_t t_ms = 0;
};

struct TodoMarker {};

using SeqElement = std::variant<MemorySegment, ClipRef, QuestionRef, AnsMarker, TodoMarker>;

struct InterleavedSequence {
  std::vector<SeqElement> elements;
  std::optional<std::int64_t> q_pos_ms;
  std::vector<std::int64_t> ans_positions_ms;
};

enum class Stage { Idle, A, B, C };

struct SequenceFlags {
  bool no_ans_token = false;
  bool no_todo_token = false;
};

/// Returns a description of the first grammar or tiling violation, or
/// nullopt when the sequence is well formed.
std::optional<std::string> check_sequence(const InterleavedSequence& seq, SequenceFlags flags);

/// Short textual form, e.g. "M Q F F TODO".
std::string describe(const InterleavedSequence& seq);

class DecisionState {
 public:
  explicit DecisionState(SequenceFlags flags = {});

  void ingest_clip(std::shared_ptr<const ClipFeature> cf);
  void ingest_clip(const ClipFeature& cf) { ingest_clip(std::make_shared<const ClipFeature>(cf)); }
  void insert_question(std::shared_ptr<const Question> q, std::int64_t t_ms);
  /// Pools the clips preceding the question into one memory segment.
  void compact_to_memory();
  void record_answer(std::int64_t t_ms);

  const InterleavedSequence& sequence() const noexcept { return seq_; }
  SequenceFlags flags() const noexcept { return flags_; }
  Stage stage() const noexcept { return stage_; }
  const Question* question() const noexcept { return question_.get(); }
  std::size_t answers_recorded() const noexcept { return seq_.ans_positions_ms.size(); }
  std::size_t clips_ingested() const noexcept { return next_clip_; }
  /// Most recently ingested clip, while it is still raw.
  const ClipFeature* current_clip() const noexcept;

 private:
  std::size_t tail_insert_pos() const noexcept;

  SequenceFlags flags_;
  InterleavedSequence seq_;
  Stage stage_ = Stage::Idle;
  std::shared_ptr<const Question> question_;
  std::size_t next_clip_ = 0;
};

/// Embedding read at the TODO position by the heuristic and learned scorers:
/// the mean of (question embedding, mean of raw clip features, mean of memory
/// segments not sealed by an ANS marker), over the parts present. With the
/// TODO ablation, the vector of the last element carrying one.
Vec aggregate_todo_embedding(const InterleavedSequence& seq, SequenceFlags flags);

enum class ScorerKind { Oracle, Heuristic, Learned, External };

struct DecisionHead {
  Vec weights;
  double bias = 0.0;
};

struct DecisionScorer {
  ScorerKind kind = ScorerKind::Heuristic;
  double threshold = 0.5;
  // heuristic: weights = gain * question embedding, bias = -gain * offset
  double gain = 12.0;
  double offset = 0.45;
  // learned
  DecisionHead head;
  // external
  std::string endpoint;
  int timeout_ms = 1000;
};

struct DecisionRecord {
  std::int64_t t_ms = 0;
  double p_respond = 0.0;
  bool respond = false;
  Vec todo_embed;
};

DecisionRecord evaluate_todo(const DecisionState& state, const DecisionScorer& scorer,
                             std::int64_t t_ms);

/// Wire format of POST /score.
nlohmann::json sequence_to_wire(const InterleavedSequence& seq, std::size_t dim);

struct LabeledSnapshot {
  InterleavedSequence sequence;
  SequenceFlags flags;
  int label = 0;
};

struct DecisionTrainResult {
  DecisionHead head;
  std::vector<double> loss_curve;  // epochs + 1 entries, before each step and after the last
};

/// Mean BCE over the dataset and its gradient w.r.t. (weights..., bias).
LossWithGrad decision_objective(const DecisionHead& head, std::span<const Vec> features,
                                std::span<const int> labels);

/// Full-batch gradient descent on mean BCE of logistic(w.x + b).
DecisionTrainResult train_decision_head(std::span<const LabeledSnapshot> dataset, int epochs,
                                        double lr, std::optional<DecisionHead> init = {});

nlohmann::json decision_head_to_json(const DecisionHead& head);
DecisionHead decision_head_from_json(const nlohmann::json& doc);

}  // namespace streamweave
