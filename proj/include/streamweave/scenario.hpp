#pragma once
// Replayable inputs: a frame stream (explicit or generated) plus questions
// with insertion times and ground-truth relevant spans.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "streamweave/segmenter.hpp"
#include "streamweave/vector_core.hpp"

namespace streamweave {

struct Interval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  bool contains(std::int64_t t) const noexcept { return start_ms <= t && t < end_ms; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct ExpectedAnswer {
  std::int64_t t_ms = 0;
  std::string text;
  friend bool operator==(const ExpectedAnswer&, const ExpectedAnswer&) = default;
};

struct Question {
  std::string id;
  std::int64_t t_ms = 0;
  std::string text;
  Vec embedding;  // unit norm
  std::vector<Interval> relevant_spans_ms;
  std::vector<ExpectedAnswer> expected_answers;
  friend bool operator==(const Question&, const Question&) = default;
};

struct GeneratorSegment {
  std::size_t length_frames = 1;
  std::uint64_t direction_seed = 0;
  double noise_sigma = 0.0;
  bool relevant = false;
  friend bool operator==(const GeneratorSegment&, const GeneratorSegment&) = default;
};

struct GeneratorSpec {
  std::uint64_t seed = 0;
  std::vector<GeneratorSegment> segments;
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

class Scenario {
 public:
  int version = 1;
  std::int64_t frame_period_ms = 1000;
  std::size_t dim = 2;
  std::variant<std::vector<FrameEmbedding>, GeneratorSpec> source;
  std::vector<Question> questions;

  std::size_t frame_count() const;
  std::int64_t frame_time(std::size_t i) const;
  /// Frame i; generated frames are synthesized on demand and deterministic.
  FrameEmbedding frame(std::size_t i) const;
  std::vector<FrameEmbedding> materialize() const;
  /// End of the stream: last frame time plus one period (0 when empty).
  std::int64_t duration_ms() const;
  /// Relevant segments of a generator stream as time spans.
  std::vector<Interval> relevant_segment_spans() const;

  /// Throws Error(ValidationError) on any invariant breach.
  void validate() const;
};

/// Unit direction drawn from a seed (isotropic Gaussian, normalized).
Vec seeded_direction(std::uint64_t seed, std::size_t dim);

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& s);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

/// Question template for synthesis; the embedding is taken verbatim when
/// given, otherwise drawn from embedding_seed. Relevant spans default to the
/// segments flagged relevant.
struct QuestionSpec {
  std::string id;
  std::int64_t t_ms = 0;
  std::string text;
  Vec embedding;
  std::uint64_t embedding_seed = 0;
  std::vector<ExpectedAnswer> expected_answers;
};

struct SynthesisSpec {
  std::size_t dim = 16;
  std::int64_t frame_period_ms = 1000;
  std::vector<GeneratorSegment> segments;
  std::vector<QuestionSpec> questions;
};

/// Deterministic for a fixed (spec, seed). Throws Error(InvalidSpec).
Scenario synthesize_scenario(const SynthesisSpec& spec, std::uint64_t seed);

}  // namespace streamweave
