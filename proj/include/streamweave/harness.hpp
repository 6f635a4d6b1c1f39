#pragma once
// Benchmark harness: synthetic scenario families, training-set collection,
// trainers over scenario directories and ablation grids.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "streamweave/config.hpp"
#include "streamweave/decision.hpp"
#include "streamweave/metrics.hpp"
#include "streamweave/retrieval.hpp"
#include "streamweave/scenario.hpp"

namespace streamweave {

/// Streams whose relevant segments share one planted direction across the
/// whole family, with one question at question_t_ms. The relevant span
/// covers segment 1 and, for about half of the seeds, segment 3.
struct PlantedSpec {
  std::size_t dim = 256;
  std::int64_t frame_period_ms = 500;
  std::size_t segments = 5;
  std::size_t frames_per_segment = 16;
  double noise_sigma = 0.1;
  std::uint64_t planted_seed = 0x5eed;
  std::uint64_t question_seed = 0x9e57;
  std::int64_t question_t_ms = 0;
};

Scenario planted_scenario(const PlantedSpec& spec, std::uint64_t seed);

/// Scene A, a short relevant scene B, then A again; question at t=0 whose
/// embedding is B's direction.
Scenario two_scene_scenario(std::uint64_t seed, std::size_t dim = 64, double noise_sigma = 0.2);

/// irrelevant / relevant / irrelevant / relevant / irrelevant, 16 frames each,
/// question asked just before the first relevant segment with the relevant
/// direction as its embedding.
Scenario multi_answer_scenario(std::uint64_t seed, std::size_t dim = 64, double noise_sigma = 0.1);

enum class ScenarioFamily { Planted, TwoScene, MultiAnswer };
ScenarioFamily parse_family(const std::string& name);

/// Writes count scenarios named scenario_000.json, ... into dir.
std::vector<std::filesystem::path> write_dataset(const std::filesystem::path& dir, ScenarioFamily family,
                                                 std::size_t count, std::uint64_t seed);

struct NamedScenario {
  std::string name;
  Scenario scenario;
};

/// Every *.json in dir, sorted by file name. Throws Error(NotFound) when the
/// directory is missing.
std::vector<NamedScenario> load_scenario_dir(const std::filesystem::path& dir);

struct TrainingData {
  std::vector<LabeledSnapshot> decisions;
  std::vector<RetrievalSample> retrieval;
};

/// Replays each scenario with the oracle scorer in charge (teacher forcing)
/// and records every evaluation with the oracle's label, plus one retrieval
/// sample per respond decision that has relevant clips.
TrainingData collect_training_data(std::span<const NamedScenario> scenarios, const RunConfig& cfg);

struct DecisionTrainReport {
  DecisionTrainResult result;
  std::size_t samples = 0;
  std::size_t positives = 0;
  double train_accuracy = 0.0;
};

struct RetrievalTrainReport {
  RetrievalTrainResult result;
  std::size_t samples = 0;
  double recall_before = 0.0;
  double recall_after = 0.0;
};

DecisionTrainReport train_decision_on(std::span<const NamedScenario> scenarios, const RunConfig& cfg,
                                      int epochs, double lr);
RetrievalTrainReport train_retrieval_on(std::span<const NamedScenario> scenarios, const RunConfig& cfg,
                                        int epochs, double lr);

nlohmann::json decision_report_to_json(const DecisionTrainReport& r, int epochs, double lr);
nlohmann::json retrieval_report_to_json(const RetrievalTrainReport& r, int epochs, double lr);

/// Runs every scenario under cfg and pools the metrics.
MetricsReport evaluate_set(std::span<const NamedScenario> scenarios, const RunConfig& cfg);

enum class CompareAxis { Segmenter, Tokens, Mode };
CompareAxis parse_axis(const std::string& name);

struct CompareRow {
  std::string label;
  RunConfig config;
  MetricsReport metrics;
};

struct CompareReport {
  std::string axis;
  std::uint64_t seed = 0;
  std::size_t scenarios = 0;
  std::string baseline;
  std::vector<CompareRow> rows;
};

/// Row configurations for an axis, derived from base. The first row is the
/// baseline.
std::vector<std::pair<std::string, RunConfig>> compare_grid(CompareAxis axis, const RunConfig& base);

CompareReport run_compare(std::span<const NamedScenario> scenarios, CompareAxis axis, const RunConfig& base,
                          std::uint64_t seed);

nlohmann::json compare_to_json(const CompareReport& r);
std::string compare_to_text(const CompareReport& r);
std::string metrics_to_text(const MetricsReport& m);

}  // namespace streamweave
