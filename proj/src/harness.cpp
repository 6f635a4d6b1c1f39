#include "streamweave/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "streamweave/error.hpp"
#include "streamweave/orchestrator.hpp"
#include "streamweave/seeding.hpp"

namespace streamweave {

namespace {

GeneratorSegment segment(std::size_t frames, std::uint64_t dir, double sigma, bool relevant) {
  return GeneratorSegment{frames, dir, sigma, relevant};
}

QuestionSpec question(std::int64_t t_ms, std::uint64_t embedding_seed) {
  QuestionSpec q;
  q.id = "q0";
  q.t_ms = t_ms;
  q.text = "When does the planted event happen?";
  q.embedding_seed = embedding_seed;
  return q;
}

}  // namespace

Scenario planted_scenario(const PlantedSpec& spec, std::uint64_t seed) {
  if (spec.segments < 2) throw Error(ErrorCode::InvalidSpec, "planted scenarios need >= 2 segments");
  const bool second = spec.segments > 3 && (mix_seed(seed, 0xa11) & 1U) == 1U;
  SynthesisSpec syn;
  syn.dim = spec.dim;
  syn.frame_period_ms = spec.frame_period_ms;
  for (std::size_t i = 0; i < spec.segments; ++i) {
    const bool relevant = i == 1 || (second && i == 3);
    const std::uint64_t dir = relevant ? spec.planted_seed : mix_seed(seed, 100 + i);
    syn.segments.push_back(segment(spec.frames_per_segment, dir, spec.noise_sigma, relevant));
  }
  syn.questions.push_back(question(spec.question_t_ms, spec.question_seed));
  return synthesize_scenario(syn, seed);
}

Scenario two_scene_scenario(std::uint64_t seed, std::size_t dim, double noise_sigma) {
  const std::uint64_t a = mix_seed(seed, 1);
  const std::uint64_t b = mix_seed(seed, 2);
  SynthesisSpec syn;
  syn.dim = dim;
  syn.frame_period_ms = 500;
  syn.segments = {segment(20, a, noise_sigma, false), segment(12, b, noise_sigma, true),
                  segment(16, a, noise_sigma, false)};
  syn.questions.push_back(question(0, b));
  return synthesize_scenario(syn, seed);
}

Scenario multi_answer_scenario(std::uint64_t seed, std::size_t dim, double noise_sigma) {
  const std::uint64_t rel = mix_seed(seed, 7);
  SynthesisSpec syn;
  syn.dim = dim;
  syn.frame_period_ms = 500;
  for (std::size_t i = 0; i < 5; ++i) {
    const bool relevant = i % 2 == 1;
    syn.segments.push_back(segment(16, relevant ? rel : mix_seed(seed, 20 + i), noise_sigma, relevant));
  }
  syn.questions.push_back(question(16 * 500 - 500, rel));
  return synthesize_scenario(syn, seed);
}

ScenarioFamily parse_family(const std::string& name) {
  if (name == "planted") return ScenarioFamily::Planted;
  if (name == "two_scene") return ScenarioFamily::TwoScene;
  if (name == "multi_answer") return ScenarioFamily::MultiAnswer;
  throw Error(ErrorCode::InvalidConfig, "unknown scenario family '" + name + "'");
}

std::vector<std::filesystem::path> write_dataset(const std::filesystem::path& dir, ScenarioFamily family,
                                                 std::size_t count, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t s = mix_seed(seed, i);
    Scenario sc;
    switch (family) {
      case ScenarioFamily::Planted: sc = planted_scenario(PlantedSpec{}, s); break;
      case ScenarioFamily::TwoScene: sc = two_scene_scenario(s); break;
      case ScenarioFamily::MultiAnswer: sc = multi_answer_scenario(s); break;
    }
    char name[48];
    std::snprintf(name, sizeof name, "scenario_%03zu.json", i);
    paths.push_back(dir / name);
    save_scenario(sc, paths.back());
  }
  return paths;
}

std::vector<NamedScenario> load_scenario_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::NotFound, "scenario dir not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedScenario> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back({f.filename().string(), load_scenario(f)});
  return out;
}

TrainingData collect_training_data(std::span<const NamedScenario> scenarios, const RunConfig& cfg) {
  RunConfig teacher = cfg;
  teacher.scorer.kind = ScorerKind::Oracle;
  teacher.mode = RunMode::Async;
  teacher.ablations.no_silent_token = true;
  teacher.reaction.kind = ReactionConfig::Kind::Mock;

  TrainingData data;
  for (const auto& ns : scenarios) {
    const Question* q = nullptr;
    RunHooks hooks;
    hooks.probe = [&](const DecisionState& state, const DecisionRecord& rec, const ClipList& clips) {
      data.decisions.push_back({state.sequence(), state.flags(), rec.respond ? 1 : 0});
      q = state.question();
      if (!rec.respond || clips.empty() || q == nullptr) return;
      RetrievalSample sample;
      sample.todo_embed = rec.todo_embed;
      for (std::size_t i = 0; i < clips.size(); ++i) {
        const Clip& c = clips[i]->clip;
        sample.indicators.push_back(clips[i]->indicator);
        const bool relevant = std::any_of(q->relevant_spans_ms.begin(), q->relevant_spans_ms.end(),
                                          [&](const Interval& s) { return c.overlaps(s.start_ms, s.end_ms); });
        if (relevant) sample.relevant.push_back(i);
      }
      if (!sample.relevant.empty()) data.retrieval.push_back(std::move(sample));
    };
    run(ns.scenario, teacher, hooks);
  }
  return data;
}

DecisionTrainReport train_decision_on(std::span<const NamedScenario> scenarios, const RunConfig& cfg,
                                      int epochs, double lr) {
  const TrainingData data = collect_training_data(scenarios, cfg);
  if (data.decisions.empty()) throw Error(ErrorCode::EmptyDataset, "no decision evaluations in the data");
  DecisionTrainReport r;
  r.samples = data.decisions.size();
  r.result = train_decision_head(data.decisions, epochs, lr);
  std::size_t correct = 0;
  for (const auto& s : data.decisions) {
    r.positives += s.label == 1 ? 1 : 0;
    const Vec x = aggregate_todo_embedding(s.sequence, s.flags);
    const double p = logistic(dot(r.result.head.weights, x) + r.result.head.bias);
    correct += (p >= cfg.scorer.threshold) == (s.label == 1) ? 1 : 0;
  }
  r.train_accuracy = static_cast<double>(correct) / static_cast<double>(r.samples);
  return r;
}

RetrievalTrainReport train_retrieval_on(std::span<const NamedScenario> scenarios, const RunConfig& cfg,
                                        int epochs, double lr) {
  const TrainingData data = collect_training_data(scenarios, cfg);
  if (data.retrieval.empty()) throw Error(ErrorCode::EmptyDataset, "no retrieval samples in the data");
  const std::size_t dim = data.retrieval.front().todo_embed.size();
  RetrievalHead init = RetrievalHead::identity(dim, cfg.retrieval.temperature.value_or(1.0));
  RetrievalTrainReport r;
  r.samples = data.retrieval.size();
  r.recall_before = recall_at_1(init, data.retrieval);
  r.result = train_retrieval(data.retrieval, epochs, lr, std::move(init));
  r.recall_after = recall_at_1(r.result.head, data.retrieval);
  return r;
}

nlohmann::json decision_report_to_json(const DecisionTrainReport& r, int epochs, double lr) {
  return {{"kind", "decision"},
          {"params", decision_head_to_json(r.result.head)},
          {"loss_curve", r.result.loss_curve},
          {"final_loss", r.result.loss_curve.back()},
          {"epochs", epochs},
          {"lr", lr},
          {"samples", r.samples},
          {"positives", r.positives},
          {"train_accuracy", r.train_accuracy}};
}

nlohmann::json retrieval_report_to_json(const RetrievalTrainReport& r, int epochs, double lr) {
  return {{"kind", "retrieval"},
          {"params", retrieval_head_to_json(r.result.head)},
          {"loss_curve", r.result.loss_curve},
          {"final_loss", r.result.loss_curve.back()},
          {"epochs", epochs},
          {"lr", lr},
          {"samples", r.samples},
          {"recall_at_1_before", r.recall_before},
          {"recall_at_1", r.recall_after}};
}

MetricsReport evaluate_set(std::span<const NamedScenario> scenarios, const RunConfig& cfg) {
  MetricsAccumulator acc;
  for (const auto& ns : scenarios) acc.add(run(ns.scenario, cfg), ns.scenario);
  return acc.report();
}

CompareAxis parse_axis(const std::string& name) {
  if (name == "segmenter") return CompareAxis::Segmenter;
  if (name == "tokens") return CompareAxis::Tokens;
  if (name == "mode") return CompareAxis::Mode;
  throw Error(ErrorCode::InvalidConfig, "unknown axis '" + name + "'");
}

std::vector<std::pair<std::string, RunConfig>> compare_grid(CompareAxis axis, const RunConfig& base) {
  std::vector<std::pair<std::string, RunConfig>> rows;
  switch (axis) {
    case CompareAxis::Segmenter: {
      RunConfig scene = base;
      scene.segmenter.mode = SegmentMode::Scene;
      RunConfig uniform = base;
      uniform.segmenter.mode = SegmentMode::Uniform;
      rows = {{"scene", scene}, {"uniform", uniform}};
      break;
    }
    case CompareAxis::Tokens: {
      struct Combo {
        const char* label;
        bool ans, todo, silent;
      };
      static constexpr Combo kCombos[] = {
          {"ans+todo+silent", true, true, true}, {"none", false, false, false},
          {"silent", false, false, true},        {"ans+silent", true, false, true},
          {"todo+silent", false, true, true},    {"ans+todo", true, true, false},
      };
      for (const auto& c : kCombos) {
        RunConfig cfg = base;
        cfg.ablations = {!c.ans, !c.todo, !c.silent};
        rows.emplace_back(c.label, cfg);
      }
      break;
    }
    case CompareAxis::Mode: {
      RunConfig async = base;
      async.mode = RunMode::Async;
      RunConfig serial = base;
      serial.mode = RunMode::Serial;
      rows = {{"async", async}, {"serial", serial}};
      break;
    }
  }
  return rows;
}

CompareReport run_compare(std::span<const NamedScenario> scenarios, CompareAxis axis, const RunConfig& base,
                          std::uint64_t seed) {
  static constexpr const char* kAxes[] = {"segmenter", "tokens", "mode"};
  RunConfig seeded = base;
  seeded.seed = seed;
  seeded.reaction.latency.seed = seed;
  CompareReport report;
  report.axis = kAxes[static_cast<int>(axis)];
  report.seed = seed;
  report.scenarios = scenarios.size();
  for (auto& [label, cfg] : compare_grid(axis, seeded)) {
    report.rows.push_back({label, cfg, evaluate_set(scenarios, cfg)});
  }
  if (report.rows.empty() || scenarios.empty()) throw Error(ErrorCode::EmptyDataset, "empty comparison grid");
  report.baseline = report.rows.front().label;
  return report;
}

nlohmann::json compare_to_json(const CompareReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json deltas = nlohmann::json::array();
  const MetricsReport& base = r.rows.front().metrics;
  for (const auto& row : r.rows) {
    const auto& cfg = row.config;
    rows.push_back({{"label", row.label},
                    {"config",
                     {{"mode", cfg.mode == RunMode::Async ? "async" : "serial"},
                      {"segmenter", cfg.segmenter.mode == SegmentMode::Scene ? "scene" : "uniform"},
                      {"ablations",
                       {{"no_ans_token", cfg.ablations.no_ans_token},
                        {"no_todo_token", cfg.ablations.no_todo_token},
                        {"no_silent_token", cfg.ablations.no_silent_token}}}}},
                    {"metrics", metrics_to_json(row.metrics)}});
    const auto& m = row.metrics;
    deltas.push_back(
        {{"label", row.label},
         {"tvg_f1", m.tvg_f1 - base.tvg_f1},
         {"precision", m.precision - base.precision},
         {"recall", m.recall - base.recall},
         {"false_positives", static_cast<long long>(m.false_positives) - static_cast<long long>(base.false_positives)},
         {"perception_stall_ms", m.perception_stall_ms - base.perception_stall_ms},
         {"frames_dropped", static_cast<long long>(m.frames_dropped) - static_cast<long long>(base.frames_dropped)}});
  }
  return {{"axis", r.axis},
          {"seed", r.seed},
          {"scenarios", r.scenarios},
          {"baseline", r.baseline},
          {"rows", std::move(rows)},
          {"deltas", std::move(deltas)}};
}

std::string metrics_to_text(const MetricsReport& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "tvg_f1 %.4f  precision %.4f  recall %.4f  (tp %zu fp %zu fn %zu)\n"
                "answers %zu  silent %zu  reactions %zu  suppressed %zu  failed %zu\n"
                "decision latency mean %.1f ms p95 %.1f ms  reaction latency mean %.1f ms p95 %.1f ms\n"
                "perception stall %.0f ms  frames dropped %zu\n",
                m.tvg_f1, m.precision, m.recall, m.true_positives, m.false_positives, m.false_negatives,
                m.answers, m.silent, m.reactions, m.suppressed, m.failed, m.decision_latency_ms.mean,
                m.decision_latency_ms.p95, m.reaction_latency_ms.mean, m.reaction_latency_ms.p95,
                m.perception_stall_ms, m.frames_dropped);
  std::string out = buf;
  if (m.retrieval_recall_at_1) {
    std::snprintf(buf, sizeof buf, "retrieval recall@1 %.4f\n", *m.retrieval_recall_at_1);
    out += buf;
  }
  if (m.caption_token_f1) {
    std::snprintf(buf, sizeof buf, "caption %s %.4f\n", m.similarity_kind.c_str(), *m.caption_token_f1);
    out += buf;
  }
  return out;
}

std::string compare_to_text(const CompareReport& r) {
  std::ostringstream os;
  os << "axis " << r.axis << ", seed " << r.seed << ", " << r.scenarios << " scenario(s), baseline "
     << r.baseline << "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %8s %9s %8s %4s %4s %4s %10s %8s\n", "row", "f1", "precision", "recall",
                "tp", "fp", "fn", "stall_ms", "dropped");
  os << buf;
  for (const auto& row : r.rows) {
    const auto& m = row.metrics;
    std::snprintf(buf, sizeof buf, "%-18s %8.4f %9.4f %8.4f %4zu %4zu %4zu %10.0f %8zu\n", row.label.c_str(),
                  m.tvg_f1, m.precision, m.recall, m.true_positives, m.false_positives, m.false_negatives,
                  m.perception_stall_ms, m.frames_dropped);
    os << buf;
  }
  return os.str();
}

}  // namespace streamweave
