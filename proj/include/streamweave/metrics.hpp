#pragma once
// Post-hoc streaming metrics over a finished Timeline.
//
// Matching: each relevant span of a question is matched by the earliest
// not yet matched, non-silent AnswerEmitted for that question whose
// trigger_t_ms lies inside the span (TP). Unmatched answers are false
// positives, unmatched spans false negatives.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "streamweave/scenario.hpp"
#include "streamweave/timeline.hpp"

namespace streamweave {

struct LatencyStats {
  double mean = 0.0;
  double p95 = 0.0;
  std::size_t count = 0;
  friend bool operator==(const LatencyStats&, const LatencyStats&) = default;
};

struct MetricsReport {
  double tvg_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::optional<double> caption_token_f1;  // absent without expected answers
  std::string similarity_kind = "token_f1";
  LatencyStats decision_latency_ms;
  LatencyStats reaction_latency_ms;
  double perception_stall_ms = 0.0;
  std::size_t frames_dropped = 0;
  std::size_t reactions = 0;
  std::size_t answers = 0;
  std::size_t silent = 0;
  std::size_t failed = 0;
  std::size_t suppressed = 0;
  std::optional<double> retrieval_recall_at_1;  // over reactions of questions with spans
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Set-of-tokens F1 between two strings (lowercased alphanumeric tokens).
double token_f1(const std::string& a, const std::string& b);

/// Mean and nearest-rank 95th percentile.
LatencyStats latency_stats(std::vector<double> samples);

/// Pools counts and latency samples over several runs.
class MetricsAccumulator {
 public:
  /// Throws Error(IncompleteTimeline) without a StreamEnded event.
  void add(const Timeline& tl, const Scenario& scenario);
  MetricsReport report() const;

 private:
  MetricsReport totals_;
  std::vector<double> decision_lat_;
  std::vector<double> reaction_lat_;
  std::vector<double> captions_;
  std::size_t recall_hits_ = 0;
  std::size_t recall_total_ = 0;
};

/// Throws Error(IncompleteTimeline) without a StreamEnded event.
MetricsReport compute_metrics(const Timeline& tl, const Scenario& scenario);

nlohmann::json metrics_to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const nlohmann::json& doc);

}  // namespace streamweave
