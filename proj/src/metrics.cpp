#include "streamweave/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "streamweave/error.hpp"

namespace streamweave {

namespace {

std::set<std::string> tokens(const std::string& s) {
  std::set<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(std::move(cur));
  return out;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct AnswerRef {
  std::int64_t trigger_t_ms;
  std::string text;
  bool matched = false;
};

}  // namespace

double token_f1(const std::string& a, const std::string& b) {
  const auto ta = tokens(a);
  const auto tb = tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : ta) common += tb.count(t);
  const double p = ratio(common, ta.size());
  const double r = ratio(common, tb.size());
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

LatencyStats latency_stats(std::vector<double> samples) {
  LatencyStats s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size())));
  s.p95 = samples[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

void MetricsAccumulator::add(const Timeline& tl, const Scenario& scenario) {
  if (!tl.ended()) throw Error(ErrorCode::IncompleteTimeline, "timeline has no StreamEnded event");

  MetricsReport& m = totals_;
  std::map<std::size_t, Interval> clip_spans;
  std::map<std::size_t, std::int64_t> clip_nominal;
  struct Start {
    std::int64_t t_ms;
    bool blocking;
  };
  std::map<std::uint64_t, Start> starts;
  std::map<std::string, std::vector<AnswerRef>> answers;

  std::map<std::string, const Question*> questions;
  for (const auto& q : scenario.questions) questions[q.id] = &q;

  for (const auto& ev : tl.events()) {
    const auto& p = ev.payload;
    switch (ev.kind) {
      case EventKind::ClipEmitted: {
        const auto idx = p.at("clip").get<std::size_t>();
        clip_spans[idx] = {p.at("span_ms").at(0).get<std::int64_t>(), p.at("span_ms").at(1).get<std::int64_t>()};
        clip_nominal[idx] = p.at("nominal_t_ms").get<std::int64_t>();
        break;
      }
      case EventKind::FrameDropped:
        ++m.frames_dropped;
        break;
      case EventKind::Decision:
        if (!p.at("clip").is_null()) {
          const auto it = clip_nominal.find(p.at("clip").get<std::size_t>());
          if (it != clip_nominal.end()) decision_lat_.push_back(static_cast<double>(ev.t_ms - it->second));
        }
        break;
      case EventKind::Suppressed:
        ++m.suppressed;
        break;
      case EventKind::ReactionStart: {
        ++m.reactions;
        starts[p.at("reaction").get<std::uint64_t>()] = {ev.t_ms, p.value("blocking", false)};
        const auto qit = questions.find(p.value("question_id", std::string()));
        if (qit != questions.end() && !qit->second->relevant_spans_ms.empty()) {
          ++recall_total_;
          if (!p.at("top1").is_null()) {
            const auto cit = clip_spans.find(p.at("top1").get<std::size_t>());
            if (cit != clip_spans.end()) {
              const Interval c = cit->second;
              const bool hit = std::any_of(
                  qit->second->relevant_spans_ms.begin(), qit->second->relevant_spans_ms.end(),
                  [&](const Interval& s) { return c.start_ms < s.end_ms && s.start_ms < c.end_ms; });
              recall_hits_ += hit ? 1 : 0;
            }
          }
        }
        break;
      }
      case EventKind::ReactionEnd:
      case EventKind::Failed: {
        if (ev.kind == EventKind::Failed) ++m.failed;
        if (!p.contains("reaction")) break;
        const auto it = starts.find(p.at("reaction").get<std::uint64_t>());
        if (it == starts.end()) break;
        if (it->second.blocking) m.perception_stall_ms += static_cast<double>(ev.t_ms - it->second.t_ms);
        if (ev.kind == EventKind::ReactionEnd) {
          reaction_lat_.push_back(static_cast<double>(ev.t_ms - p.at("trigger_t_ms").get<std::int64_t>()));
        }
        break;
      }
      case EventKind::AnswerEmitted:
        ++m.answers;
        answers[p.at("question_id").get<std::string>()].push_back(
            {p.at("trigger_t_ms").get<std::int64_t>(), p.value("text", std::string())});
        break;
      case EventKind::Silent:
        ++m.silent;
        break;
      default:
        break;
    }
  }

  for (const auto& q : scenario.questions) {
    auto& list = answers[q.id];
    for (const auto& span : q.relevant_spans_ms) {
      auto it = std::find_if(list.begin(), list.end(), [&](const AnswerRef& a) {
        return !a.matched && span.contains(a.trigger_t_ms);
      });
      if (it == list.end()) {
        ++m.false_negatives;
        continue;
      }
      it->matched = true;
      ++m.true_positives;
      const auto exp = std::find_if(q.expected_answers.begin(), q.expected_answers.end(),
                                    [&](const ExpectedAnswer& e) { return span.contains(e.t_ms); });
      if (exp != q.expected_answers.end()) captions_.push_back(token_f1(it->text, exp->text));
    }
  }
  for (const auto& [qid, list] : answers) {
    m.false_positives += static_cast<std::size_t>(
        std::count_if(list.begin(), list.end(), [](const AnswerRef& a) { return !a.matched; }));
  }
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport m = totals_;
  m.precision = ratio(m.true_positives, m.true_positives + m.false_positives);
  m.recall = ratio(m.true_positives, m.true_positives + m.false_negatives);
  m.tvg_f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  if (!captions_.empty()) {
    m.caption_token_f1 =
        std::accumulate(captions_.begin(), captions_.end(), 0.0) / static_cast<double>(captions_.size());
  }
  m.decision_latency_ms = latency_stats(decision_lat_);
  m.reaction_latency_ms = latency_stats(reaction_lat_);
  if (recall_total_ > 0) m.retrieval_recall_at_1 = ratio(recall_hits_, recall_total_);
  return m;
}

MetricsReport compute_metrics(const Timeline& tl, const Scenario& scenario) {
  MetricsAccumulator acc;
  acc.add(tl, scenario);
  return acc.report();
}

namespace {

nlohmann::json stats_json(const LatencyStats& s) {
  return {{"mean", s.mean}, {"p95", s.p95}, {"count", s.count}};
}

LatencyStats stats_from(const nlohmann::json& j) {
  return {j.at("mean").get<double>(), j.at("p95").get<double>(), j.at("count").get<std::size_t>()};
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& m) {
  return {{"tvg_f1", m.tvg_f1},
          {"precision", m.precision},
          {"recall", m.recall},
          {"true_positives", m.true_positives},
          {"false_positives", m.false_positives},
          {"false_negatives", m.false_negatives},
          {"caption_token_f1", opt(m.caption_token_f1)},
          {"similarity_kind", m.similarity_kind},
          {"decision_latency_ms", stats_json(m.decision_latency_ms)},
          {"reaction_latency_ms", stats_json(m.reaction_latency_ms)},
          {"perception_stall_ms", m.perception_stall_ms},
          {"frames_dropped", m.frames_dropped},
          {"reactions", m.reactions},
          {"answers", m.answers},
          {"silent", m.silent},
          {"failed", m.failed},
          {"suppressed", m.suppressed},
          {"retrieval_recall_at_1", opt(m.retrieval_recall_at_1)}};
}

MetricsReport metrics_from_json(const nlohmann::json& doc) {
  try {
    MetricsReport m;
    m.tvg_f1 = doc.at("tvg_f1").get<double>();
    m.precision = doc.at("precision").get<double>();
    m.recall = doc.at("recall").get<double>();
    m.true_positives = doc.at("true_positives").get<std::size_t>();
    m.false_positives = doc.at("false_positives").get<std::size_t>();
    m.false_negatives = doc.at("false_negatives").get<std::size_t>();
    m.caption_token_f1 = opt_from(doc.at("caption_token_f1"));
    m.similarity_kind = doc.at("similarity_kind").get<std::string>();
    m.decision_latency_ms = stats_from(doc.at("decision_latency_ms"));
    m.reaction_latency_ms = stats_from(doc.at("reaction_latency_ms"));
    m.perception_stall_ms = doc.at("perception_stall_ms").get<double>();
    m.frames_dropped = doc.at("frames_dropped").get<std::size_t>();
    m.reactions = doc.at("reactions").get<std::size_t>();
    m.answers = doc.at("answers").get<std::size_t>();
    m.silent = doc.at("silent").get<std::size_t>();
    m.failed = doc.at("failed").get<std::size_t>();
    m.suppressed = doc.at("suppressed").get<std::size_t>();
    m.retrieval_recall_at_1 = opt_from(doc.at("retrieval_recall_at_1"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("metrics report: ") + e.what());
  }
}

}  // namespace streamweave
