#include "streamweave/decision.hpp"

#include <algorithm>
#include <sstream>

#include "streamweave/http_json.hpp"
#include "streamweave/simd/kernels.hpp"

namespace streamweave {

namespace {

template <typename T>
bool is(const SeqElement& e) {
  return std::holds_alternative<T>(e);
}

struct SpanOf {
  std::int64_t start;
  std::int64_t end;
};

std::optional<SpanOf> span_of(const SeqElement& e) {
  if (const auto* m = std::get_if<MemorySegment>(&e)) return SpanOf{m->start_ms, m->end_ms};
  if (const auto* c = std::get_if<ClipRef>(&e)) return SpanOf{c->clip->clip.start_ms, c->clip->clip.end_ms};
  return std::nullopt;
}

const char* tag(const SeqElement& e) {
  return std::visit(
      [](const auto& v) -> const char* {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MemorySegment>) return "M";
        else if constexpr (std::is_same_v<T, ClipRef>) return "F";
        else if constexpr (std::is_same_v<T, QuestionRef>) return "Q";
        else if constexpr (std::is_same_v<T, AnsMarker>) return "ANS";
        else return "TODO";
      },
      e);
}

}  // namespace

std::string describe(const InterleavedSequence& seq) {
  std::string out;
  for (const auto& e : seq.elements) {
    if (!out.empty()) out += ' ';
    out += tag(e);
  }
  return out;
}

std::optional<std::string> check_sequence(const InterleavedSequence& seq, SequenceFlags flags) {
  const auto& el = seq.elements;
  const auto todo_count = std::count_if(el.begin(), el.end(), is<TodoMarker>);
  if (flags.no_todo_token) {
    if (todo_count != 0) return "TODO marker present although disabled";
  } else if (todo_count != 1 || el.empty() || !is<TodoMarker>(el.back())) {
    return "expected exactly one trailing TODO marker";
  }
  const std::size_t body_end = flags.no_todo_token ? el.size() : el.size() - 1;

  const auto q_count = std::count_if(el.begin(), el.end(), is<QuestionRef>);
  if (q_count > 1) return "more than one question";
  if (flags.no_ans_token && std::any_of(el.begin(), el.end(), is<AnsMarker>)) {
    return "ANS marker present although disabled";
  }

  if (q_count == 0) {
    for (std::size_t i = 0; i < body_end; ++i) {
      if (!is<ClipRef>(el[i])) return std::string("idle sequence holds ") + tag(el[i]);
    }
    if (!seq.ans_positions_ms.empty()) return "answers recorded without a question";
  } else {
    const std::size_t qi = static_cast<std::size_t>(
        std::find_if(el.begin(), el.end(), is<QuestionRef>) - el.begin());
    bool prefix_raw = false;
    if (qi == 1 && is<MemorySegment>(el[0])) {
      // stage B/C prefix
    } else {
      for (std::size_t i = 0; i < qi; ++i) {
        if (!is<ClipRef>(el[i])) return "question prefix must be raw clips or one memory segment";
      }
      prefix_raw = qi > 0;
    }
    // suffix: (M? ANS)* F*   or, without ANS markers, M* F*
    std::size_t i = qi + 1;
    std::vector<std::int64_t> marks;
    while (i < body_end && !is<ClipRef>(el[i])) {
      if (is<MemorySegment>(el[i])) {
        if (!flags.no_ans_token && (i + 1 >= body_end || !is<AnsMarker>(el[i + 1]))) {
          return "memory segment after the question must be sealed by ANS";
        }
        ++i;
      } else if (is<AnsMarker>(el[i])) {
        marks.push_back(std::get<AnsMarker>(el[i]).t_ms);
        ++i;
      } else {
        return std::string("unexpected ") + tag(el[i]) + " after the question";
      }
    }
    for (; i < body_end; ++i) {
      if (!is<ClipRef>(el[i])) return std::string("unexpected ") + tag(el[i]) + " in the raw tail";
    }
    if (prefix_raw && body_end > qi + 1) return "stage A sequence continues past the question";
    if (!flags.no_ans_token && marks != seq.ans_positions_ms) {
      return "ANS markers disagree with recorded answer positions";
    }
    if (!std::is_sorted(seq.ans_positions_ms.begin(), seq.ans_positions_ms.end()) ||
        std::adjacent_find(seq.ans_positions_ms.begin(), seq.ans_positions_ms.end()) !=
            seq.ans_positions_ms.end()) {
      return "answer positions are not strictly increasing";
    }
  }

  std::optional<std::int64_t> last_end;
  for (const auto& e : el) {
    const auto sp = span_of(e);
    if (!sp) continue;
    if (sp->end <= sp->start) return "empty span";
    if (last_end && sp->start != *last_end) return "spans do not tile (gap or overlap)";
    last_end = sp->end;
  }
  return std::nullopt;
}

DecisionState::DecisionState(SequenceFlags flags) : flags_(flags) {
  if (!flags_.no_todo_token) seq_.elements.emplace_back(TodoMarker{});
}

std::size_t DecisionState::tail_insert_pos() const noexcept {
  return flags_.no_todo_token ? seq_.elements.size() : seq_.elements.size() - 1;
}

const ClipFeature* DecisionState::current_clip() const noexcept {
  const std::size_t pos = tail_insert_pos();
  if (pos == 0) return nullptr;
  if (const auto* c = std::get_if<ClipRef>(&seq_.elements[pos - 1])) return c->clip.get();
  return nullptr;
}

void DecisionState::ingest_clip(std::shared_ptr<const ClipFeature> cf) {
  if (!cf || cf->clip.index != next_clip_) {
    throw Error(ErrorCode::NonConsecutiveClip,
                "expected clip " + std::to_string(next_clip_) + ", got " +
                    (cf ? std::to_string(cf->clip.index) : std::string("null")));
  }
  if (stage_ == Stage::A) compact_to_memory();
  seq_.elements.insert(seq_.elements.begin() + static_cast<std::ptrdiff_t>(tail_insert_pos()),
                       ClipRef{std::move(cf)});
  ++next_clip_;
}

void DecisionState::insert_question(std::shared_ptr<const Question> q, std::int64_t t_ms) {
  if (question_) throw Error(ErrorCode::QuestionAlreadyActive, "question '" + question_->id + "' is active");
  if (!q) throw Error(ErrorCode::EmptyInput, "null question");
  question_ = q;
  seq_.elements.insert(seq_.elements.begin() + static_cast<std::ptrdiff_t>(tail_insert_pos()),
                       QuestionRef{std::move(q)});
  seq_.q_pos_ms = t_ms;
  stage_ = Stage::A;
}

namespace {

MemorySegment pool_clips(std::span<const SeqElement> clips) {
  std::vector<Vec> features;
  features.reserve(clips.size());
  for (const auto& e : clips) features.push_back(std::get<ClipRef>(e).clip->feature);
  const auto& first = std::get<ClipRef>(clips.front()).clip->clip;
  const auto& last = std::get<ClipRef>(clips.back()).clip->clip;
  return MemorySegment{first.start_ms, last.end_ms, mean_pool(features)};
}

}  // namespace

void DecisionState::compact_to_memory() {
  if (!question_) throw Error(ErrorCode::NoActiveQuestion, "no question to compact around");
  if (stage_ != Stage::A) return;
  auto& el = seq_.elements;
  const auto qi = static_cast<std::size_t>(std::find_if(el.begin(), el.end(), is<QuestionRef>) - el.begin());
  if (qi > 0) {
    MemorySegment mem = pool_clips(std::span<const SeqElement>(el.data(), qi));
    el.erase(el.begin(), el.begin() + static_cast<std::ptrdiff_t>(qi));
    el.insert(el.begin(), std::move(mem));
  }
  stage_ = Stage::B;
}

void DecisionState::record_answer(std::int64_t t_ms) {
  if (!question_) throw Error(ErrorCode::NoActiveQuestion, "answer without an active question");
  if (t_ms < *seq_.q_pos_ms ||
      (!seq_.ans_positions_ms.empty() && t_ms <= seq_.ans_positions_ms.back())) {
    throw Error(ErrorCode::NonMonotonicAnswer, "answer at " + std::to_string(t_ms) + " ms");
  }
  if (stage_ == Stage::A) compact_to_memory();

  auto& el = seq_.elements;
  const std::size_t end = tail_insert_pos();
  std::size_t first_raw = end;
  while (first_raw > 0 && is<ClipRef>(el[first_raw - 1])) --first_raw;
  std::size_t pooled_end = first_raw;
  while (pooled_end < end && std::get<ClipRef>(el[pooled_end]).clip->clip.end_ms <= t_ms) ++pooled_end;

  std::vector<SeqElement> replacement;
  if (pooled_end > first_raw) {
    replacement.emplace_back(
        pool_clips(std::span<const SeqElement>(el.data() + first_raw, pooled_end - first_raw)));
  }
  if (!flags_.no_ans_token) replacement.emplace_back(AnsMarker{t_ms});
  el.erase(el.begin() + static_cast<std::ptrdiff_t>(first_raw),
           el.begin() + static_cast<std::ptrdiff_t>(pooled_end));
  el.insert(el.begin() + static_cast<std::ptrdiff_t>(first_raw), replacement.begin(),
            replacement.end());
  seq_.ans_positions_ms.push_back(t_ms);
  stage_ = Stage::C;
}

Vec aggregate_todo_embedding(const InterleavedSequence& seq, SequenceFlags flags) {
  const auto& el = seq.elements;
  if (flags.no_todo_token) {
    for (auto it = el.rbegin(); it != el.rend(); ++it) {
      if (const auto* c = std::get_if<ClipRef>(&*it)) return c->clip->feature;
      if (const auto* m = std::get_if<MemorySegment>(&*it)) return m->vec;
      if (const auto* q = std::get_if<QuestionRef>(&*it)) return q->question->embedding;
    }
    throw Error(ErrorCode::MalformedSequence, "no element carries an embedding");
  }

  std::vector<Vec> parts;
  std::vector<Vec> raw;
  std::vector<Vec> memory;
  for (std::size_t i = 0; i < el.size(); ++i) {
    if (const auto* q = std::get_if<QuestionRef>(&el[i])) {
      parts.push_back(q->question->embedding);
    } else if (const auto* c = std::get_if<ClipRef>(&el[i])) {
      raw.push_back(c->clip->feature);
    } else if (const auto* m = std::get_if<MemorySegment>(&el[i])) {
      const bool sealed = i + 1 < el.size() && is<AnsMarker>(el[i + 1]);
      if (!sealed) memory.push_back(m->vec);
    }
  }
  if (!raw.empty()) parts.push_back(mean_pool(raw));
  if (!memory.empty()) parts.push_back(mean_pool(memory));
  if (parts.empty()) throw Error(ErrorCode::MalformedSequence, "nothing to aggregate at TODO");
  return mean_pool(parts);
}

namespace {

bool oracle_should_respond(const DecisionState& state, std::int64_t t_ms) {
  const Question* q = state.question();
  const ClipFeature* clip = state.current_clip();
  if (q == nullptr || clip == nullptr) return false;
  for (const auto& span : q->relevant_spans_ms) {
    if (!span.contains(t_ms) || !clip->clip.overlaps(span.start_ms, span.end_ms)) continue;
    bool answered = false;
    for (const auto& e : state.sequence().elements) {
      if (const auto* a = std::get_if<AnsMarker>(&e)) {
        answered = answered || (a->t_ms >= span.start_ms && a->t_ms <= t_ms);
      }
    }
    if (!answered) return true;
  }
  return false;
}

}  // namespace

nlohmann::json sequence_to_wire(const InterleavedSequence& seq, std::size_t dim) {
  nlohmann::json elements = nlohmann::json::array();
  for (const auto& e : seq.elements) {
    nlohmann::json item;
    std::visit(
        [&item](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, MemorySegment>) {
            item = {{"kind", "mem"}, {"vec", v.vec}, {"span_ms", {v.start_ms, v.end_ms}}};
          } else if constexpr (std::is_same_v<T, ClipRef>) {
            item = {{"kind", "clip"},
                    {"vec", v.clip->feature},
                    {"span_ms", {v.clip->clip.start_ms, v.clip->clip.end_ms}}};
          } else if constexpr (std::is_same_v<T, QuestionRef>) {
            item = {{"kind", "question"}, {"vec", v.question->embedding}, {"span_ms", nullptr}};
          } else if constexpr (std::is_same_v<T, AnsMarker>) {
            item = {{"kind", "ans"}, {"vec", nullptr}, {"span_ms", {v.t_ms, v.t_ms}}};
          } else {
            item = {{"kind", "todo"}, {"vec", nullptr}, {"span_ms", nullptr}};
          }
        },
        e);
    elements.push_back(std::move(item));
  }
  return {{"elements", std::move(elements)}, {"dim", dim}};
}

DecisionRecord evaluate_todo(const DecisionState& state, const DecisionScorer& scorer,
                             std::int64_t t_ms) {
  const auto& seq = state.sequence();
  if (auto violation = check_sequence(seq, state.flags())) {
    throw Error(ErrorCode::MalformedSequence, *violation);
  }
  DecisionRecord rec;
  rec.t_ms = t_ms;
  rec.todo_embed = aggregate_todo_embedding(seq, state.flags());

  switch (scorer.kind) {
    case ScorerKind::Oracle:
      rec.p_respond = oracle_should_respond(state, t_ms) ? 1.0 : 0.0;
      break;
    case ScorerKind::Heuristic: {
      if (state.question() == nullptr) {
        throw Error(ErrorCode::MalformedSequence, "heuristic scorer needs a question");
      }
      const double z = scorer.gain * (dot(state.question()->embedding, rec.todo_embed) - scorer.offset);
      rec.p_respond = logistic(z);
      break;
    }
    case ScorerKind::Learned:
      rec.p_respond = logistic(dot(scorer.head.weights, rec.todo_embed) + scorer.head.bias);
      break;
    case ScorerKind::External: {
      const auto reply =
          post_json(scorer.endpoint, "/score", sequence_to_wire(seq, rec.todo_embed.size()),
                    scorer.timeout_ms);
      try {
        rec.p_respond = reply.at("p_respond").get<double>();
        if (reply.contains("todo_embed") && reply.at("todo_embed").is_array()) {
          rec.todo_embed = reply.at("todo_embed").get<Vec>();
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("/score: ") + e.what());
      }
      break;
    }
  }
  rec.respond = rec.p_respond >= scorer.threshold;
  return rec;
}

LossWithGrad decision_objective(const DecisionHead& head, std::span<const Vec> features,
                                std::span<const int> labels) {
  if (features.empty()) throw Error(ErrorCode::EmptyDataset, "no decision samples");
  const std::size_t d = head.weights.size();
  const auto& k = simd::active();
  LossWithGrad out;
  out.grad.assign(d + 1, 0.0);
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double p = logistic(dot(head.weights, features[i]) + head.bias);
    const LossWithGrad bce = bce_with_grad(p, labels[i]);
    const double dz = bce.grad[0] * p * (1.0 - p);
    out.loss += bce.loss * inv_n;
    k.axpy(dz * inv_n, features[i].data(), out.grad.data(), d);
    out.grad[d] += dz * inv_n;
  }
  return out;
}

DecisionTrainResult train_decision_head(std::span<const LabeledSnapshot> dataset, int epochs,
                                        double lr, std::optional<DecisionHead> init) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "no decision samples");
  std::vector<Vec> features;
  std::vector<int> labels;
  features.reserve(dataset.size());
  for (const auto& s : dataset) {
    features.push_back(aggregate_todo_embedding(s.sequence, s.flags));
    labels.push_back(s.label);
  }
  DecisionTrainResult result;
  result.head = init ? *init : DecisionHead{Vec(features.front().size(), 0.0), 0.0};
  if (result.head.weights.size() != features.front().size()) {
    throw Error(ErrorCode::DimensionMismatch, "initial head has the wrong dimension");
  }
  const std::size_t d = result.head.weights.size();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const LossWithGrad obj = decision_objective(result.head, features, labels);
    result.loss_curve.push_back(obj.loss);
    simd::active().axpy(-lr, obj.grad.data(), result.head.weights.data(), d);
    result.head.bias -= lr * obj.grad[d];
  }
  result.loss_curve.push_back(decision_objective(result.head, features, labels).loss);
  return result;
}

nlohmann::json decision_head_to_json(const DecisionHead& head) {
  return {{"weights", head.weights}, {"bias", head.bias}};
}

DecisionHead decision_head_from_json(const nlohmann::json& doc) {
  try {
    return DecisionHead{doc.at("weights").get<Vec>(), doc.at("bias").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("decision head: ") + e.what());
  }
}

}  // namespace streamweave
