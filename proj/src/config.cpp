#include "streamweave/config.hpp"

#include <fstream>

#include "streamweave/error.hpp"

namespace streamweave {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& path) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad(path + "." + key + ": wrong type");
  }
}

const json& section(const json& doc, const char* key) {
  static const json empty = json::object();
  if (!doc.contains(key)) return empty;
  const json& s = doc.at(key);
  if (!s.is_object()) bad(std::string("$.") + key + ": expected an object");
  return s;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "file not found: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

const json& params_of(const json& doc) { return doc.contains("params") ? doc.at("params") : doc; }

}  // namespace

DecisionHead load_decision_params(const std::filesystem::path& path) {
  return decision_head_from_json(params_of(read_json_file(path)));
}

RetrievalHead load_retrieval_params(const std::filesystem::path& path) {
  return retrieval_head_from_json(params_of(read_json_file(path)));
}

RetrievalHead RunConfig::retrieval_head(std::size_t dim) const {
  RetrievalHead head = retrieval.head ? *retrieval.head : RetrievalHead::identity(dim);
  if (head.dim != dim) {
    throw Error(ErrorCode::DimensionMismatch, "retrieval params have dim " + std::to_string(head.dim) +
                                                  ", stream has dim " + std::to_string(dim));
  }
  if (retrieval.temperature) head.temperature = *retrieval.temperature;
  return head;
}

void RunConfig::validate() const {
  segmenter.validate();
  if (!(scorer.threshold >= 0.0 && scorer.threshold <= 1.0)) bad("scorer.threshold must lie in [0, 1]");
  if (scorer.kind == ScorerKind::External && scorer.endpoint.empty()) bad("scorer.endpoint required");
  if (reaction.kind == ReactionConfig::Kind::External && reaction.endpoint.empty()) {
    bad("reaction.endpoint required");
  }
  if (!(reaction.silent_margin >= 0.0)) bad("reaction.silent_margin must be >= 0");
  const auto& lat = reaction.latency;
  if (lat.kind == LatencyModel::Kind::Fixed && lat.fixed_ms < 0) bad("reaction.latency must be >= 0");
  if (lat.kind == LatencyModel::Kind::Uniform && (lat.lo_ms < 0 || lat.hi_ms < lat.lo_ms)) {
    bad("reaction.latency.uniform_ms needs 0 <= lo <= hi");
  }
  if (retrieval.temperature && !(*retrieval.temperature > 0.0)) bad("retrieval.temperature must be > 0");
  if (retrieval.policy.kind == SelectionPolicy::Kind::TopK && retrieval.policy.k < 1) bad("retrieval.k must be >= 1");
  if (retrieval.policy.kind == SelectionPolicy::Kind::Threshold &&
      (!(retrieval.policy.alpha > 0.0) || retrieval.policy.cap < 1)) {
    bad("retrieval.alpha must be > 0 and retrieval.cap >= 1");
  }
  if (!(wall_speed > 0.0)) bad("wall_speed must be > 0");
  if (drop_after_ms && *drop_after_ms < 0) bad("drop_after_ms must be >= 0");
}

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) bad("run config: expected an object");
  RunConfig cfg;

  std::string mode = "async";
  read(doc, "mode", mode, "$");
  if (mode == "async") cfg.mode = RunMode::Async;
  else if (mode == "serial") cfg.mode = RunMode::Serial;
  else bad("$.mode: unknown mode '" + mode + "'");

  std::string clock = "virtual";
  read(doc, "clock", clock, "$");
  if (clock == "virtual") cfg.clock = ClockKind::Virtual;
  else if (clock == "wall") cfg.clock = ClockKind::Wall;
  else bad("$.clock: unknown clock '" + clock + "'");

  read(doc, "seed", cfg.seed, "$");

  const json& seg = section(doc, "segmenter");
  std::string seg_mode = "scene";
  read(seg, "mode", seg_mode, "$.segmenter");
  if (seg_mode == "scene") cfg.segmenter.mode = SegmentMode::Scene;
  else if (seg_mode == "uniform") cfg.segmenter.mode = SegmentMode::Uniform;
  else bad("$.segmenter.mode: unknown mode '" + seg_mode + "'");
  read(seg, "threshold", cfg.segmenter.threshold, "$.segmenter");
  read(seg, "exclusion_window", cfg.segmenter.exclusion_window, "$.segmenter");
  read(seg, "min_frames", cfg.segmenter.min_frames, "$.segmenter");
  read(seg, "max_frames", cfg.segmenter.max_frames, "$.segmenter");
  read(seg, "uniform_frames", cfg.segmenter.uniform_frames, "$.segmenter");

  const json& sc = section(doc, "scorer");
  std::string kind = "heuristic";
  read(sc, "kind", kind, "$.scorer");
  if (kind == "oracle") cfg.scorer.kind = ScorerKind::Oracle;
  else if (kind == "heuristic") cfg.scorer.kind = ScorerKind::Heuristic;
  else if (kind == "learned") cfg.scorer.kind = ScorerKind::Learned;
  else if (kind == "external") cfg.scorer.kind = ScorerKind::External;
  else bad("$.scorer.kind: unknown scorer '" + kind + "'");
  read(sc, "threshold", cfg.scorer.threshold, "$.scorer");
  read(sc, "gain", cfg.scorer.gain, "$.scorer");
  read(sc, "offset", cfg.scorer.offset, "$.scorer");
  read(sc, "weights", cfg.scorer.head.weights, "$.scorer");
  read(sc, "bias", cfg.scorer.head.bias, "$.scorer");
  read(sc, "endpoint", cfg.scorer.endpoint, "$.scorer");
  read(sc, "timeout_ms", cfg.scorer.timeout_ms, "$.scorer");
  if (sc.contains("params_file")) {
    std::string file;
    read(sc, "params_file", file, "$.scorer");
    cfg.scorer.head = load_decision_params(resolve(base_dir, file));
  }
  if (cfg.scorer.kind == ScorerKind::Learned && cfg.scorer.head.weights.empty()) {
    bad("$.scorer: learned scorer needs weights or params_file");
  }

  const json& rt = section(doc, "retrieval");
  std::string policy = "threshold";
  read(rt, "policy", policy, "$.retrieval");
  if (policy == "threshold") cfg.retrieval.policy.kind = SelectionPolicy::Kind::Threshold;
  else if (policy == "top_k") cfg.retrieval.policy.kind = SelectionPolicy::Kind::TopK;
  else bad("$.retrieval.policy: unknown policy '" + policy + "'");
  read(rt, "alpha", cfg.retrieval.policy.alpha, "$.retrieval");
  read(rt, "k", cfg.retrieval.policy.k, "$.retrieval");
  read(rt, "cap", cfg.retrieval.policy.cap, "$.retrieval");
  if (rt.contains("temperature")) {
    double t = 0.0;
    read(rt, "temperature", t, "$.retrieval");
    cfg.retrieval.temperature = t;
  }
  if (rt.contains("params_file")) {
    std::string file;
    read(rt, "params_file", file, "$.retrieval");
    cfg.retrieval.head = load_retrieval_params(resolve(base_dir, file));
  }

  const json& rc = section(doc, "reaction");
  std::string rkind = "mock";
  read(rc, "kind", rkind, "$.reaction");
  if (rkind == "mock") cfg.reaction.kind = ReactionConfig::Kind::Mock;
  else if (rkind == "external") cfg.reaction.kind = ReactionConfig::Kind::External;
  else bad("$.reaction.kind: unknown backend '" + rkind + "'");
  read(rc, "silent_margin", cfg.reaction.silent_margin, "$.reaction");
  read(rc, "endpoint", cfg.reaction.endpoint, "$.reaction");
  read(rc, "timeout_ms", cfg.reaction.timeout_ms, "$.reaction");
  const json& lat = section(rc, "latency");
  if (lat.contains("fixed_ms") && lat.contains("uniform_ms")) bad("$.reaction.latency: pick one model");
  if (lat.contains("fixed_ms")) {
    cfg.reaction.latency.kind = LatencyModel::Kind::Fixed;
    read(lat, "fixed_ms", cfg.reaction.latency.fixed_ms, "$.reaction.latency");
  } else if (lat.contains("uniform_ms")) {
    std::vector<std::int64_t> range;
    read(lat, "uniform_ms", range, "$.reaction.latency");
    if (range.size() != 2) bad("$.reaction.latency.uniform_ms: expected [lo, hi]");
    cfg.reaction.latency.kind = LatencyModel::Kind::Uniform;
    cfg.reaction.latency.lo_ms = range[0];
    cfg.reaction.latency.hi_ms = range[1];
  }
  cfg.reaction.latency.seed = cfg.seed;

  const json& ab = section(doc, "ablations");
  read(ab, "no_ans_token", cfg.ablations.no_ans_token, "$.ablations");
  read(ab, "no_todo_token", cfg.ablations.no_todo_token, "$.ablations");
  read(ab, "no_silent_token", cfg.ablations.no_silent_token, "$.ablations");

  std::string ans_at = "completion";
  read(doc, "ans_at", ans_at, "$");
  if (ans_at == "completion") cfg.ans_at = AnsAt::Completion;
  else if (ans_at == "trigger") cfg.ans_at = AnsAt::Trigger;
  else bad("$.ans_at: unknown value '" + ans_at + "'");

  if (doc.contains("queue_capacity") && !doc.at("queue_capacity").is_null()) {
    const json& qc = doc.at("queue_capacity");
    if (!qc.is_number_integer() || qc.get<std::int64_t>() < 0) bad("$.queue_capacity: expected an integer >= 0");
    cfg.queue_capacity = qc.get<std::size_t>();
  }
  if (doc.contains("drop_after_ms") && !doc.at("drop_after_ms").is_null()) {
    std::int64_t v = 0;
    read(doc, "drop_after_ms", v, "$");
    cfg.drop_after_ms = v;
  }
  read(doc, "wall_speed", cfg.wall_speed, "$");

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "config not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

json run_config_to_json(const RunConfig& cfg) {
  static constexpr const char* kScorers[] = {"oracle", "heuristic", "learned", "external"};
  json scorer = {{"kind", kScorers[static_cast<int>(cfg.scorer.kind)]},
                 {"threshold", cfg.scorer.threshold},
                 {"gain", cfg.scorer.gain},
                 {"offset", cfg.scorer.offset},
                 {"timeout_ms", cfg.scorer.timeout_ms}};
  if (!cfg.scorer.head.weights.empty()) {
    scorer["weights"] = cfg.scorer.head.weights;
    scorer["bias"] = cfg.scorer.head.bias;
  }
  if (!cfg.scorer.endpoint.empty()) scorer["endpoint"] = cfg.scorer.endpoint;

  const auto& pol = cfg.retrieval.policy;
  json retrieval = {{"policy", pol.kind == SelectionPolicy::Kind::TopK ? "top_k" : "threshold"},
                    {"alpha", pol.alpha},
                    {"k", pol.k},
                    {"cap", pol.cap}};
  if (cfg.retrieval.temperature) retrieval["temperature"] = *cfg.retrieval.temperature;

  const auto& lat = cfg.reaction.latency;
  json latency = lat.kind == LatencyModel::Kind::Fixed
                     ? json{{"fixed_ms", lat.fixed_ms}}
                     : json{{"uniform_ms", {lat.lo_ms, lat.hi_ms}}};
  json reaction = {{"kind", cfg.reaction.kind == ReactionConfig::Kind::Mock ? "mock" : "external"},
                   {"silent_margin", cfg.reaction.silent_margin},
                   {"latency", std::move(latency)},
                   {"timeout_ms", cfg.reaction.timeout_ms}};
  if (!cfg.reaction.endpoint.empty()) reaction["endpoint"] = cfg.reaction.endpoint;

  const auto& seg = cfg.segmenter;
  return {{"mode", cfg.mode == RunMode::Async ? "async" : "serial"},
          {"clock", cfg.clock == ClockKind::Virtual ? "virtual" : "wall"},
          {"seed", cfg.seed},
          {"segmenter",
           {{"mode", seg.mode == SegmentMode::Scene ? "scene" : "uniform"},
            {"threshold", seg.threshold},
            {"exclusion_window", seg.exclusion_window},
            {"min_frames", seg.min_frames},
            {"max_frames", seg.max_frames},
            {"uniform_frames", seg.uniform_frames}}},
          {"scorer", std::move(scorer)},
          {"retrieval", std::move(retrieval)},
          {"reaction", std::move(reaction)},
          {"ablations",
           {{"no_ans_token", cfg.ablations.no_ans_token},
            {"no_todo_token", cfg.ablations.no_todo_token},
            {"no_silent_token", cfg.ablations.no_silent_token}}},
          {"ans_at", cfg.ans_at == AnsAt::Completion ? "completion" : "trigger"},
          {"queue_capacity", cfg.queue_capacity ? json(*cfg.queue_capacity) : json(nullptr)},
          {"drop_after_ms", cfg.drop_after_ms ? json(*cfg.drop_after_ms) : json(nullptr)},
          {"wall_speed", cfg.wall_speed}};
}

}  // namespace streamweave
