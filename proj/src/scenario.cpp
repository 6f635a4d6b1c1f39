#include "streamweave/scenario.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "streamweave/seeding.hpp"

namespace streamweave {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ValidationError, what); }

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw Error(ErrorCode::SchemaError, path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::SchemaError, path + "." + key + ": missing field");
  return *it;
}

template <typename T>
T typed(const json& v, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw Error(ErrorCode::SchemaError, path + ": expected a string");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw Error(ErrorCode::SchemaError, path + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw Error(ErrorCode::SchemaError, path + ": expected an integer");
    } else {
      if (!v.is_number()) throw Error(ErrorCode::SchemaError, path + ": expected a number");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, path + ": " + e.what());
  }
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& path) {
  return typed<T>(field(obj, key, path), path + "." + key);
}

Vec parse_vector(const json& v, const std::string& path) {
  if (!v.is_array()) throw Error(ErrorCode::SchemaError, path + ": expected an array of numbers");
  Vec out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(typed<double>(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<Interval> parse_spans(const json& v, const std::string& path) {
  if (!v.is_array()) throw Error(ErrorCode::SchemaError, path + ": expected an array of spans");
  std::vector<Interval> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != 2) {
      throw Error(ErrorCode::SchemaError, p + ": expected [start_ms, end_ms]");
    }
    out.push_back({typed<std::int64_t>(v[i][0], p + "[0]"), typed<std::int64_t>(v[i][1], p + "[1]")});
  }
  return out;
}

}  // namespace

Vec seeded_direction(std::uint64_t seed, std::size_t dim) {
  std::mt19937_64 rng(mix_seed(seed, 0x5eedd1eULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(dim);
  for (;;) {
    for (double& x : v) x = gauss(rng);
    if (norm(v) >= 1e-6) return l2_normalize(v);
  }
}

std::size_t Scenario::frame_count() const {
  if (const auto* frames = std::get_if<std::vector<FrameEmbedding>>(&source)) return frames->size();
  std::size_t total = 0;
  for (const auto& seg : std::get<GeneratorSpec>(source).segments) total += seg.length_frames;
  return total;
}

std::int64_t Scenario::frame_time(std::size_t i) const {
  if (const auto* frames = std::get_if<std::vector<FrameEmbedding>>(&source)) return (*frames)[i].t_ms;
  return static_cast<std::int64_t>(i) * frame_period_ms;
}

FrameEmbedding Scenario::frame(std::size_t i) const {
  if (const auto* frames = std::get_if<std::vector<FrameEmbedding>>(&source)) return frames->at(i);
  const auto& gen = std::get<GeneratorSpec>(source);
  std::size_t offset = 0;
  for (const auto& seg : gen.segments) {
    if (i < offset + seg.length_frames) {
      Vec v = seeded_direction(seg.direction_seed, dim);
      if (seg.noise_sigma > 0.0) {
        // per-component sigma/sqrt(dim): expected noise norm is sigma
        std::mt19937_64 rng(mix_seed(gen.seed, i));
        std::normal_distribution<double> gauss(0.0, seg.noise_sigma / std::sqrt(double(dim)));
        for (double& x : v) x += gauss(rng);
        if (norm(v) >= kZeroNorm) v = l2_normalize(v);
      }
      return {frame_time(i), std::move(v)};
    }
    offset += seg.length_frames;
  }
  throw Error(ErrorCode::IndexOutOfRange, "frame " + std::to_string(i) + " beyond stream end");
}

std::vector<FrameEmbedding> Scenario::materialize() const {
  std::vector<FrameEmbedding> out;
  const std::size_t n = frame_count();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(frame(i));
  return out;
}

std::int64_t Scenario::duration_ms() const {
  const std::size_t n = frame_count();
  return n == 0 ? 0 : frame_time(n - 1) + frame_period_ms;
}

std::vector<Interval> Scenario::relevant_segment_spans() const {
  std::vector<Interval> spans;
  const auto* gen = std::get_if<GeneratorSpec>(&source);
  if (gen == nullptr) return spans;
  std::int64_t start = 0;
  for (const auto& seg : gen->segments) {
    const std::int64_t end = start + static_cast<std::int64_t>(seg.length_frames) * frame_period_ms;
    if (seg.relevant) {
      if (!spans.empty() && spans.back().end_ms == start) {
        spans.back().end_ms = end;
      } else {
        spans.push_back({start, end});
      }
    }
    start = end;
  }
  return spans;
}

void Scenario::validate() const {
  if (version != 1) invalid("unsupported version " + std::to_string(version));
  if (frame_period_ms <= 0) invalid("frame_period_ms must be > 0");
  if (dim < 2) invalid("dim must be >= 2");
  if (const auto* frames = std::get_if<std::vector<FrameEmbedding>>(&source)) {
    for (std::size_t i = 0; i < frames->size(); ++i) {
      const auto& f = (*frames)[i];
      if (f.vec.size() != dim) invalid("frames[" + std::to_string(i) + "].embedding has wrong dim");
      if (norm(f.vec) < kZeroNorm) invalid("frames[" + std::to_string(i) + "].embedding is zero");
      if (f.t_ms < 0) invalid("frames[" + std::to_string(i) + "].t_ms is negative");
      if (i > 0 && f.t_ms <= (*frames)[i - 1].t_ms) {
        invalid("frames[" + std::to_string(i) + "].t_ms is not increasing");
      }
    }
  } else {
    for (const auto& seg : std::get<GeneratorSpec>(source).segments) {
      if (seg.length_frames < 1) invalid("generator segment length_frames must be >= 1");
      if (!(seg.noise_sigma >= 0.0)) invalid("generator segment noise_sigma must be >= 0");
    }
  }
  const std::int64_t end = duration_ms();
  for (const auto& q : questions) {
    const std::string p = "question '" + q.id + "'";
    if (q.t_ms < 0 || q.t_ms > end) invalid(p + " t_ms lies outside the stream duration");
    if (q.embedding.size() != dim) invalid(p + " embedding has wrong dim");
    if (std::abs(norm(q.embedding) - 1.0) > 1e-6) invalid(p + " embedding is not unit norm");
    for (std::size_t i = 0; i < q.relevant_spans_ms.size(); ++i) {
      const auto& s = q.relevant_spans_ms[i];
      if (s.end_ms <= s.start_ms) invalid(p + " has an empty relevant span");
      if (i > 0 && s.start_ms < q.relevant_spans_ms[i - 1].end_ms) {
        invalid(p + " relevant spans overlap or are unsorted");
      }
    }
  }
}

Scenario parse_scenario(const json& doc) {
  const std::string root = "$";
  Scenario s;
  s.version = get_field<int>(doc, "version", root);
  s.frame_period_ms = get_field<std::int64_t>(doc, "frame_period_ms", root);
  s.dim = get_field<std::size_t>(doc, "dim", root);

  const bool has_frames = doc.contains("frames");
  const bool has_generator = doc.contains("generator");
  if (has_frames == has_generator) {
    throw Error(ErrorCode::SchemaError, "$: exactly one of 'frames' or 'generator' is required");
  }
  if (has_frames) {
    const json& arr = doc.at("frames");
    if (!arr.is_array()) throw Error(ErrorCode::SchemaError, "$.frames: expected an array");
    std::vector<FrameEmbedding> frames;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "$.frames[" + std::to_string(i) + "]";
      frames.push_back({get_field<std::int64_t>(arr[i], "t_ms", p),
                        parse_vector(field(arr[i], "embedding", p), p + ".embedding")});
    }
    s.source = std::move(frames);
  } else {
    const json& g = doc.at("generator");
    GeneratorSpec gen;
    gen.seed = get_field<std::uint64_t>(g, "seed", "$.generator");
    const json& segs = field(g, "segments", "$.generator");
    if (!segs.is_array()) throw Error(ErrorCode::SchemaError, "$.generator.segments: expected an array");
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const std::string p = "$.generator.segments[" + std::to_string(i) + "]";
      GeneratorSegment seg;
      seg.length_frames = get_field<std::size_t>(segs[i], "length_frames", p);
      seg.direction_seed = get_field<std::uint64_t>(segs[i], "direction_seed", p);
      seg.noise_sigma = get_field<double>(segs[i], "noise_sigma", p);
      seg.relevant = segs[i].contains("relevant") ? get_field<bool>(segs[i], "relevant", p) : false;
      gen.segments.push_back(seg);
    }
    s.source = std::move(gen);
  }

  const json& qs = field(doc, "questions", root);
  if (!qs.is_array()) throw Error(ErrorCode::SchemaError, "$.questions: expected an array");
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const std::string p = "$.questions[" + std::to_string(i) + "]";
    Question q;
    q.id = get_field<std::string>(qs[i], "id", p);
    q.t_ms = get_field<std::int64_t>(qs[i], "t_ms", p);
    q.text = get_field<std::string>(qs[i], "text", p);
    q.embedding = parse_vector(field(qs[i], "embedding", p), p + ".embedding");
    if (qs[i].contains("relevant_spans_ms")) {
      q.relevant_spans_ms = parse_spans(qs[i].at("relevant_spans_ms"), p + ".relevant_spans_ms");
    } else {
      q.relevant_spans_ms = s.relevant_segment_spans();
    }
    if (qs[i].contains("expected_answers")) {
      const json& ea = qs[i].at("expected_answers");
      if (!ea.is_array()) throw Error(ErrorCode::SchemaError, p + ".expected_answers: expected an array");
      for (std::size_t j = 0; j < ea.size(); ++j) {
        const std::string pj = p + ".expected_answers[" + std::to_string(j) + "]";
        q.expected_answers.push_back(
            {get_field<std::int64_t>(ea[j], "t_ms", pj), get_field<std::string>(ea[j], "text", pj)});
      }
    }
    s.questions.push_back(std::move(q));
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "scenario not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return parse_scenario(doc);
}

json scenario_to_json(const Scenario& s) {
  json doc;
  doc["version"] = s.version;
  doc["frame_period_ms"] = s.frame_period_ms;
  doc["dim"] = s.dim;
  if (const auto* frames = std::get_if<std::vector<FrameEmbedding>>(&s.source)) {
    json arr = json::array();
    for (const auto& f : *frames) arr.push_back({{"t_ms", f.t_ms}, {"embedding", f.vec}});
    doc["frames"] = std::move(arr);
  } else {
    const auto& gen = std::get<GeneratorSpec>(s.source);
    json segs = json::array();
    for (const auto& seg : gen.segments) {
      segs.push_back({{"length_frames", seg.length_frames},
                      {"direction_seed", seg.direction_seed},
                      {"noise_sigma", seg.noise_sigma},
                      {"relevant", seg.relevant}});
    }
    doc["generator"] = {{"seed", gen.seed}, {"segments", std::move(segs)}};
  }
  json qs = json::array();
  for (const auto& q : s.questions) {
    json spans = json::array();
    for (const auto& sp : q.relevant_spans_ms) spans.push_back({sp.start_ms, sp.end_ms});
    json answers = json::array();
    for (const auto& a : q.expected_answers) answers.push_back({{"t_ms", a.t_ms}, {"text", a.text}});
    qs.push_back({{"id", q.id},
                  {"t_ms", q.t_ms},
                  {"text", q.text},
                  {"embedding", q.embedding},
                  {"relevant_spans_ms", std::move(spans)},
                  {"expected_answers", std::move(answers)}});
  }
  doc["questions"] = std::move(qs);
  return doc;
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::NotFound, "cannot write " + path.string());
  out << scenario_to_json(s).dump(1) << '\n';
}

Scenario synthesize_scenario(const SynthesisSpec& spec, std::uint64_t seed) {
  if (spec.dim < 2) throw Error(ErrorCode::InvalidSpec, "dim must be >= 2");
  if (spec.frame_period_ms <= 0) throw Error(ErrorCode::InvalidSpec, "frame_period_ms must be > 0");
  for (const auto& seg : spec.segments) {
    if (seg.length_frames < 1) throw Error(ErrorCode::InvalidSpec, "segment length must be >= 1");
    if (!(seg.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise_sigma must be >= 0");
  }
  Scenario s;
  s.frame_period_ms = spec.frame_period_ms;
  s.dim = spec.dim;
  s.source = GeneratorSpec{seed, spec.segments};
  const auto spans = s.relevant_segment_spans();
  for (const auto& qs : spec.questions) {
    Question q;
    q.id = qs.id;
    q.t_ms = qs.t_ms;
    q.text = qs.text;
    q.embedding = qs.embedding.empty() ? seeded_direction(qs.embedding_seed, spec.dim)
                                       : l2_normalize(qs.embedding);
    q.relevant_spans_ms = spans;
    q.expected_answers = qs.expected_answers;
    s.questions.push_back(std::move(q));
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  return s;
}

}  // namespace streamweave
