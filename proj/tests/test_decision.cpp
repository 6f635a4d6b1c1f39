#include <cmath>

#include "doctest.h"
#include "grammar.hpp"
#include "streamweave/decision.hpp"
#include "support.hpp"

using namespace streamweave;
using swt::code_of;

namespace {

std::shared_ptr<const ClipFeature> clip(std::size_t index, std::int64_t start, std::int64_t end, Vec f) {
  auto cf = std::make_shared<ClipFeature>();
  cf->clip = Clip{index, start, end, 1, index};
  cf->feature = f;
  cf->indicator = l2_normalize(f);
  return cf;
}

std::shared_ptr<const Question> question(Vec e, std::vector<Interval> spans = {}) {
  auto q = std::make_shared<Question>();
  q->id = "q";
  q->embedding = l2_normalize(e);
  q->relevant_spans_ms = std::move(spans);
  return q;
}

}  // namespace

TEST_CASE("idle sequences hold raw clips only") {
  DecisionState st;
  st.ingest_clip(clip(0, 0, 1000, {1, 0}));
  CHECK(describe(st.sequence()) == "F TODO");
  for (std::size_t i = 1; i < 100; ++i) st.ingest_clip(clip(i, i * 1000, (i + 1) * 1000, {1, 0}));
  CHECK(st.stage() == Stage::Idle);
  CHECK(st.sequence().elements.size() == 101);
  CHECK_FALSE(check_sequence(st.sequence(), st.flags()));
  CHECK(code_of([&] { st.compact_to_memory(); }) == ErrorCode::NoActiveQuestion);
  CHECK(code_of([&] { st.record_answer(5); }) == ErrorCode::NoActiveQuestion);
  CHECK(code_of([&] { st.ingest_clip(clip(7, 0, 1, {1, 0})); }) == ErrorCode::NonConsecutiveClip);
}

TEST_CASE("stage A, B and C layouts") {
  DecisionState st;
  st.ingest_clip(clip(0, 0, 1000, {1, 0}));
  st.ingest_clip(clip(1, 1000, 2000, {0, 1}));
  st.ingest_clip(clip(2, 2000, 3000, {1, 1}));
  st.insert_question(question({1, 0}), 3000);
  CHECK(describe(st.sequence()) == "F F F Q TODO");
  CHECK(st.stage() == Stage::A);
  CHECK(code_of([&] { st.insert_question(question({0, 1}), 3000); }) == ErrorCode::QuestionAlreadyActive);

  st.compact_to_memory();
  CHECK(describe(st.sequence()) == "M Q TODO");
  const auto& m = std::get<MemorySegment>(st.sequence().elements[0]);
  CHECK(m.start_ms == 0);
  CHECK(m.end_ms == 3000);
  CHECK(m.vec[0] == doctest::Approx(2.0 / 3));
  CHECK(m.vec[1] == doctest::Approx(2.0 / 3));

  st.ingest_clip(clip(3, 3000, 4000, {0, 1}));
  st.ingest_clip(clip(4, 4000, 5000, {0, 1}));
  CHECK(describe(st.sequence()) == "M Q F F TODO");
  CHECK(st.stage() == Stage::B);
  st.ingest_clip(clip(5, 5000, 6000, {1, 0}));
  CHECK(describe(st.sequence()) == "M Q F F F TODO");

  st.record_answer(5000);
  CHECK(describe(st.sequence()) == "M Q M ANS F TODO");
  CHECK(st.stage() == Stage::C);
  const auto& m1 = std::get<MemorySegment>(st.sequence().elements[2]);
  CHECK(m1.start_ms == 3000);
  CHECK(m1.end_ms == 5000);

  st.ingest_clip(clip(6, 6000, 7000, {1, 0}));
  st.record_answer(7000);
  CHECK(describe(st.sequence()) == "M Q M ANS M ANS TODO");
  CHECK(st.sequence().ans_positions_ms == std::vector<std::int64_t>{5000, 7000});
  CHECK(code_of([&] { st.record_answer(7000); }) == ErrorCode::NonMonotonicAnswer);
  CHECK(code_of([&] { st.record_answer(100); }) == ErrorCode::NonMonotonicAnswer);
  CHECK_FALSE(check_sequence(st.sequence(), st.flags()));
}

TEST_CASE("question first, no prefix") {
  DecisionState st;
  st.insert_question(question({1, 0}), 0);
  CHECK(describe(st.sequence()) == "Q TODO");
  st.compact_to_memory();
  CHECK(describe(st.sequence()) == "Q TODO");
  st.ingest_clip(clip(0, 0, 1000, {1, 0}));
  CHECK(describe(st.sequence()) == "Q F TODO");
}

TEST_CASE("single pre-question clip becomes memory verbatim") {
  DecisionState st;
  st.ingest_clip(clip(0, 0, 1000, {0.3, -0.2}));
  st.insert_question(question({1, 0}), 1000);
  st.compact_to_memory();
  CHECK(std::get<MemorySegment>(st.sequence().elements[0]).vec == Vec{0.3, -0.2});
}

TEST_CASE("ANS ablation pools without markers") {
  DecisionState st({.no_ans_token = true});
  st.insert_question(question({1, 0}), 0);
  st.ingest_clip(clip(0, 0, 1000, {1, 0}));
  st.record_answer(1000);
  st.ingest_clip(clip(1, 1000, 2000, {0, 1}));
  st.record_answer(2000);
  CHECK(describe(st.sequence()) == "Q M M TODO");
  CHECK(st.answers_recorded() == 2);
  CHECK_FALSE(check_sequence(st.sequence(), st.flags()));
}

TEST_CASE("TODO ablation drops the trailing marker") {
  DecisionState st({.no_todo_token = true});
  st.insert_question(question({1, 0}), 0);
  st.ingest_clip(clip(0, 0, 1000, {0, 1}));
  CHECK(describe(st.sequence()) == "Q F");
  CHECK(aggregate_todo_embedding(st.sequence(), st.flags()) == Vec{0, 1});
  CHECK_FALSE(check_sequence(st.sequence(), st.flags()));
}

TEST_CASE("check_sequence rejects malformed sequences") {
  InterleavedSequence seq;
  CHECK(check_sequence(seq, {}));
  seq.elements = {TodoMarker{}, ClipRef{clip(0, 0, 1000, {1, 0})}};
  CHECK(check_sequence(seq, {}));
  seq.elements = {ClipRef{clip(0, 0, 1000, {1, 0})}, ClipRef{clip(1, 2000, 3000, {1, 0})}, TodoMarker{}};
  CHECK(check_sequence(seq, {}));
  seq.elements = {QuestionRef{question({1, 0})}, MemorySegment{0, 1000, {1, 0}}, TodoMarker{}};
  CHECK(check_sequence(seq, {}));
  seq.elements = {QuestionRef{question({1, 0})}, AnsMarker{5}, TodoMarker{}};
  CHECK(check_sequence(seq, {}));
  seq.ans_positions_ms = {5};
  CHECK_FALSE(check_sequence(seq, {}));
  seq.elements = {QuestionRef{question({1, 0})}, QuestionRef{question({1, 0})}, TodoMarker{}};
  CHECK(check_sequence(seq, {}));
}

TEST_CASE("todo aggregation") {
  DecisionState st;
  st.ingest_clip(clip(0, 0, 1000, {0, 4}));
  st.insert_question(question({1, 0}), 1000);
  st.compact_to_memory();
  st.ingest_clip(clip(1, 1000, 2000, {2, 0}));
  st.ingest_clip(clip(2, 2000, 3000, {0, 2}));
  // mean of q (1,0), raw mean (1,1), memory (0,4)
  const Vec e = aggregate_todo_embedding(st.sequence(), st.flags());
  CHECK(e[0] == doctest::Approx(2.0 / 3));
  CHECK(e[1] == doctest::Approx(5.0 / 3));

  st.record_answer(3000);
  // sealed memory segments are skipped; only q and the unsealed prefix memory remain
  const Vec after = aggregate_todo_embedding(st.sequence(), st.flags());
  CHECK(after[0] == doctest::Approx(0.5));
  CHECK(after[1] == doctest::Approx(2.0));
}

TEST_CASE("scorers") {
  DecisionState st;
  st.insert_question(question({1, 0}, {{1000, 2000}}), 0);
  st.compact_to_memory();
  st.ingest_clip(clip(0, 0, 1000, {0, 1}));

  DecisionScorer zero;
  zero.kind = ScorerKind::Learned;
  zero.head.weights = {0, 0};
  const auto r0 = evaluate_todo(st, zero, 1000);
  CHECK(r0.p_respond == 0.5);
  CHECK(r0.respond);

  DecisionScorer heur;
  const auto rh = evaluate_todo(st, heur, 1000);
  const double z = heur.gain * (0.5 - heur.offset);
  CHECK(rh.p_respond == doctest::Approx(1 / (1 + std::exp(-z))));

  DecisionScorer oracle;
  oracle.kind = ScorerKind::Oracle;
  CHECK_FALSE(evaluate_todo(st, oracle, 1000).respond);
  st.ingest_clip(clip(1, 1000, 2000, {1, 0}));
  CHECK(evaluate_todo(st, oracle, 1500).respond);
  CHECK(evaluate_todo(st, heur, 2000).todo_embed == evaluate_todo(st, heur, 2000).todo_embed);
  st.record_answer(1500);
  CHECK_FALSE(evaluate_todo(st, oracle, 1900).respond);
}

TEST_CASE("property: random legal interleavings keep the grammar") {
  swt::Rng rng(11);
  swt::GrammarStats stats;
  for (int trial = 0; trial < 1500; ++trial) {
    const SequenceFlags flags{rng.coin(0.25), rng.coin(0.25)};
    const auto v = swt::grammar_trial(rng, flags, stats);
    if (v) FAIL_CHECK("trial " << trial << ": " << *v);
  }
  CHECK(stats.answers > 500);
  CHECK(stats.questions > 500);
}

TEST_CASE("decision objective and training") {
  const std::vector<Vec> x{{1, 0}, {0, 1}, {1, 1}, {-1, 0}};
  const std::vector<int> y{1, 0, 1, 0};
  DecisionHead head{{0.3, -0.2}, 0.1};
  const auto obj = decision_objective(head, x, y);
  double want = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = 1 / (1 + std::exp(-(0.3 * x[i][0] - 0.2 * x[i][1] + 0.1)));
    want += -(y[i] ? std::log(p) : std::log(1 - p)) / 4;
  }
  CHECK(obj.loss == doctest::Approx(want).epsilon(1e-12));
  REQUIRE(obj.grad.size() == 3);

  std::vector<LabeledSnapshot> data;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto q = question({1, 1});
    LabeledSnapshot s;
    s.flags.no_todo_token = true;
    s.sequence.elements = {QuestionRef{q}, ClipRef{clip(0, 0, 1000, x[i])}};
    s.label = y[i];
    data.push_back(s);
  }
  const auto r = train_decision_head(data, 200, 1.0);
  CHECK(r.loss_curve.size() == 201);
  for (std::size_t i = 1; i < r.loss_curve.size(); ++i) CHECK(r.loss_curve[i] <= r.loss_curve[i - 1] + 1e-12);
  CHECK(r.loss_curve.back() < 0.1);

  const auto frozen = train_decision_head(data, 50, 0.0, DecisionHead{{0.5, 0.5}, -1});
  CHECK(frozen.head.weights == Vec{0.5, 0.5});
  CHECK(frozen.head.bias == -1);

  std::vector<LabeledSnapshot> one{data[0]};
  const auto single = train_decision_head(one, 30, 0.5);
  for (std::size_t i = 1; i < single.loss_curve.size(); ++i) CHECK(single.loss_curve[i] < single.loss_curve[i - 1]);

  CHECK(code_of([] { train_decision_head(std::vector<LabeledSnapshot>{}, 1, 0.1); }) == ErrorCode::EmptyDataset);
  CHECK(decision_head_from_json(decision_head_to_json(r.head)).weights == r.head.weights);
}

TEST_CASE("wire format") {
  DecisionState st;
  st.ingest_clip(clip(0, 0, 1000, {1, 0}));
  st.insert_question(question({1, 0}), 1000);
  st.compact_to_memory();
  st.record_answer(1000);
  const auto wire = sequence_to_wire(st.sequence(), 2);
  CHECK(wire["dim"] == 2);
  REQUIRE(wire["elements"].size() == 4);
  CHECK(wire["elements"][0]["kind"] == "mem");
  CHECK(wire["elements"][1]["kind"] == "question");
  CHECK(wire["elements"][2]["kind"] == "ans");
  CHECK(wire["elements"][3]["kind"] == "todo");
  CHECK(wire["elements"][3]["vec"].is_null());
}
