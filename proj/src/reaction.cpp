#include "streamweave/reaction.hpp"

#include <random>
#include <sstream>
#include <thread>

#include "streamweave/http_json.hpp"
#include "streamweave/seeding.hpp"

namespace streamweave {

std::int64_t LatencyModel::sample(std::uint64_t seq) const {
  if (kind == Kind::Fixed) return fixed_ms;
  std::mt19937_64 rng(mix_seed(seed, seq));
  std::uniform_int_distribution<std::int64_t> dist(lo_ms, hi_ms);
  return dist(rng);
}

Answer mock_generate(const ReactionRequest& req, double silent_margin, bool allow_silent) {
  Answer a;
  a.question_id = req.question ? req.question->id : std::string();
  a.trigger_t_ms = req.trigger_t_ms;
  a.emit_t_ms = req.trigger_t_ms;
  a.grounded_indices = req.grounded.clip_indices;

  const std::size_t n = req.grounded.predicted.size();
  const bool weak = n == 0 || req.grounded.predicted.max() < silent_margin / static_cast<double>(n);
  if (allow_silent && weak) {
    a.silent = true;
    return a;
  }
  a.ordinal = req.prior_answers.size() + 1;
  std::ostringstream text;
  text << "[" << a.question_id << "] answer " << a.ordinal << ":";
  if (req.grounded_clips.empty()) {
    text << " no grounded clips";
  } else {
    text << " grounded in clip";
    if (req.grounded_clips.size() > 1) text << 's';
    for (std::size_t i = 0; i < req.grounded_clips.size(); ++i) {
      const auto& g = req.grounded_clips[i];
      text << (i == 0 ? " " : ", ") << g.clip_index << " (" << g.start_ms << "-" << g.end_ms << " ms)";
    }
  }
  a.text = text.str();
  return a;
}

nlohmann::json request_to_wire(const ReactionRequest& req) {
  nlohmann::json prior = nlohmann::json::array();
  for (const auto& a : req.prior_answers) prior.push_back({{"t_ms", a.trigger_t_ms}, {"text", a.text}});
  nlohmann::json grounded = nlohmann::json::array();
  for (const auto& g : req.grounded_clips) {
    grounded.push_back({{"clip_index", g.clip_index}, {"span_ms", {g.start_ms, g.end_ms}}, {"p", g.p}});
  }
  nlohmann::json memory = nlohmann::json::array();
  for (const auto& m : req.memory_snapshot) {
    memory.push_back({{"span_ms", {m.start_ms, m.end_ms}}, {"vec", m.vec}});
  }
  return {{"question",
           {{"id", req.question ? req.question->id : ""}, {"text", req.question ? req.question->text : ""}}},
          {"prior_answers", std::move(prior)},
          {"grounded", std::move(grounded)},
          {"memory", std::move(memory)}};
}

Answer external_generate(const ReactionRequest& req, const std::string& endpoint, int timeout_ms) {
  const auto reply = post_json(endpoint, "/generate", request_to_wire(req), timeout_ms);
  Answer a;
  a.question_id = req.question ? req.question->id : std::string();
  a.trigger_t_ms = req.trigger_t_ms;
  a.emit_t_ms = req.trigger_t_ms;
  a.grounded_indices = req.grounded.clip_indices;
  try {
    if (!reply.is_object()) throw Error(ErrorCode::MalformedResponse, "/generate: expected an object");
    a.silent = reply.value("silent", false);
    a.text = a.silent ? std::string() : reply.value("text", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("/generate: ") + e.what());
  }
  if (!a.silent) a.ordinal = req.prior_answers.size() + 1;
  return a;
}

Answer ExternalGenerator::generate(const ReactionRequest& req) const {
  Answer a = external_generate(req, endpoint_, timeout_ms_);
  if (a.silent && !allow_silent_) {
    a.silent = false;
    a.ordinal = req.prior_answers.size() + 1;
  }
  return a;
}

ReactionEngine::ReactionEngine(std::shared_ptr<const GeneratorBackend> backend,
                               std::shared_ptr<WallClock> wall)
    : backend_(std::move(backend)), wall_(std::move(wall)) {}

ReactionHandle ReactionEngine::trigger(ReactionRequest req, Completion on_done) {
  ReactionHandle handle;
  handle.id = next_id_++;
  handle.trigger_t_ms = req.trigger_t_ms;
  const std::int64_t latency = backend_->latency_ms(handle.id);
  handle.due_t_ms = req.trigger_t_ms + latency;

  auto task = [backend = backend_, wall = wall_, req = std::move(req), latency, id = handle.id,
               on_done = std::move(on_done)]() -> Answer {
    const auto started = std::chrono::steady_clock::now();
    struct Notify {
      const Completion& fn;
      std::uint64_t id;
      ~Notify() {
        if (fn) fn(id);
      }
    };
    Answer answer;
    {
      // fires on success and on failure
      Notify notify{on_done, id};
      answer = backend->generate(req);
      if (wall) {
        std::this_thread::sleep_until(started + wall->to_real(latency));
        answer.emit_t_ms = std::max(wall->now_ms(), req.trigger_t_ms);
      } else {
        answer.emit_t_ms = req.trigger_t_ms + latency;
      }
    }
    return answer;
  };
  handle.result = std::async(std::launch::async, std::move(task)).share();
  return handle;
}

}  // namespace streamweave
