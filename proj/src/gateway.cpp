#include "streamweave/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <vector>

#include "httplib.h"
#include "streamweave/error.hpp"
#include "streamweave/metrics.hpp"
#include "streamweave/orchestrator.hpp"

namespace streamweave {

using nlohmann::json;

enum class SessionStatus { Idle, Playing, Paused, Ended };

const char* status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::Idle: return "idle";
    case SessionStatus::Playing: return "playing";
    case SessionStatus::Paused: return "paused";
    case SessionStatus::Ended: return "ended";
  }
  return "?";
}

class Session {
 public:
  Session(std::string id, std::string ref, Scenario scenario, const RunConfig& cfg)
      : id_(std::move(id)), ref_(std::move(ref)) {
    push(0, "SessionStatus", status_payload());
    run_ = std::make_unique<LiveRun>(std::move(scenario), cfg, [this](const TimelineEvent& ev) {
      push(ev.t_ms, std::string(to_string(ev.kind)), ev.payload);
      if (ev.kind == EventKind::StreamEnded) {
        {
          std::lock_guard lock(ev_mu_);
          status_ = SessionStatus::Ended;
        }
        push(ev.t_ms, "SessionStatus", status_payload());
        std::lock_guard lock(ev_mu_);
        closed_ = true;
        ev_cv_.notify_all();
      }
    });
  }

  ~Session() {
    shutdown();
    run_.reset();
  }

  const std::string& id() const { return id_; }
  const std::string& ref() const { return ref_; }
  LiveRun& run() { return *run_; }
  std::mutex& control_mutex() { return ctl_mu_; }

  SessionStatus status() const {
    std::lock_guard lock(ev_mu_);
    return status_;
  }

  void set_status(SessionStatus s) {
    {
      std::lock_guard lock(ev_mu_);
      if (status_ == s || status_ == SessionStatus::Ended) return;
      status_ = s;
    }
    push(run_->now_ms(), "SessionStatus", status_payload());
  }

  json describe() const {
    std::lock_guard lock(ev_mu_);
    return {{"session_id", id_},
            {"scenario", ref_},
            {"status", status_name(status_)},
            {"clock", "wall"},
            {"clients", clients_},
            {"events", events_.size()}};
  }

  /// Copies events from cursor on. Returns true once nothing more will come.
  bool next_events(std::uint64_t cursor, std::vector<json>& out, std::chrono::milliseconds wait) {
    std::unique_lock lock(ev_mu_);
    ev_cv_.wait_for(lock, wait, [&] { return cursor < events_.size() || closed_ || shutdown_; });
    for (std::uint64_t i = cursor; i < events_.size(); ++i) out.push_back(events_[i]);
    return shutdown_ || (closed_ && cursor + out.size() >= events_.size());
  }

  void attach() {
    std::lock_guard lock(ev_mu_);
    ++clients_;
  }
  void detach() {
    std::lock_guard lock(ev_mu_);
    if (clients_ > 0) --clients_;
  }

  void shutdown() {
    std::lock_guard lock(ev_mu_);
    shutdown_ = true;
    ev_cv_.notify_all();
  }

 private:
  json status_payload() const {
    std::lock_guard lock(ev_mu_);
    return {{"session_id", id_}, {"scenario", ref_}, {"status", status_name(status_)}};
  }

  void push(std::int64_t t_ms, const std::string& kind, json payload) {
    std::lock_guard lock(ev_mu_);
    t_ms = std::max(t_ms, last_t_);
    last_t_ = t_ms;
    events_.push_back({{"seq", events_.size()}, {"t_ms", t_ms}, {"kind", kind}, {"payload", std::move(payload)}});
    ev_cv_.notify_all();
  }

  std::string id_;
  std::string ref_;
  std::mutex ctl_mu_;
  mutable std::mutex ev_mu_;
  std::condition_variable ev_cv_;
  std::vector<json> events_;
  std::int64_t last_t_ = 0;
  SessionStatus status_ = SessionStatus::Idle;
  std::size_t clients_ = 0;
  bool closed_ = false;
  bool shutdown_ = false;
  std::unique_ptr<LiveRun> run_;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& msg) { reply(res, status, {{"error", msg}}); }

std::optional<json> body_json(const httplib::Request& req, httplib::Response& res) {
  try {
    json doc = req.body.empty() ? json::object() : json::parse(req.body);
    if (!doc.is_object()) {
      fail(res, 400, "expected a JSON object");
      return std::nullopt;
    }
    return doc;
  } catch (const json::parse_error& e) {
    fail(res, 400, e.what());
    return std::nullopt;
  }
}

}  // namespace

Gateway::Gateway(GatewayOptions opts) : opts_(std::move(opts)), server_(std::make_unique<httplib::Server>()) {
  opts_.config.clock = ClockKind::Wall;
  server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
  routes();
}

Gateway::~Gateway() {
  stop();
  std::lock_guard lock(mu_);
  sessions_.clear();
}

bool Gateway::listen(const std::string& host, int port) { return server_->listen(host, port); }
int Gateway::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool Gateway::listen_after_bind() { return server_->listen_after_bind(); }
void Gateway::wait_until_ready() const { server_->wait_until_ready(); }

void Gateway::stop() {
  {
    std::lock_guard lock(mu_);
    for (auto& [id, s] : sessions_) s->shutdown();
  }
  server_->stop();
}

std::shared_ptr<Session> Gateway::find(const std::string& id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void Gateway::routes() {
  auto& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    auto doc = body_json(req, res);
    if (!doc) return;
    const std::string ref = doc->value("scenario", std::string());
    if (ref.empty()) return fail(res, 400, "missing 'scenario'");
    std::filesystem::path path(ref);
    if (!std::filesystem::is_regular_file(path)) {
      path = opts_.scenario_dir / ref;
      if (!path.has_extension()) path += ".json";
    }
    if (!std::filesystem::is_regular_file(path)) return fail(res, 404, "scenario not found: " + ref);
    Scenario scenario;
    try {
      scenario = load_scenario(path);
    } catch (const Error& e) {
      return fail(res, 400, e.what());
    }
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) {
      if (s->ref() == ref && s->status() != SessionStatus::Ended) {
        return fail(res, 409, "session " + id + " already runs scenario " + ref);
      }
    }
    const std::string id = "s" + std::to_string(next_id_++);
    std::shared_ptr<Session> session;
    try {
      session = std::make_shared<Session>(id, ref, std::move(scenario), opts_.config);
    } catch (const Error& e) {
      return fail(res, 400, e.what());
    }
    sessions_[id] = session;
    reply(res, 201, session->describe());
  });

  srv.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) list.push_back(s->describe());
    reply(res, 200, list);
  });

  srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return fail(res, 404, "unknown session");
    reply(res, 200, s->describe());
  });

  srv.Post(R"(/sessions/([^/]+)/questions)", [this](const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return fail(res, 404, "unknown session");
    auto doc = body_json(req, res);
    if (!doc) return;
    std::lock_guard ctl(s->control_mutex());
    const auto st = s->status();
    if (st != SessionStatus::Playing && st != SessionStatus::Paused) {
      return fail(res, 409, std::string("session is ") + status_name(st));
    }
    std::optional<Vec> embedding;
    try {
      if (doc->contains("embedding") && !doc->at("embedding").is_null()) embedding = doc->at("embedding").get<Vec>();
      const std::string qid = s->run().inject_question(doc->value("text", std::string()), embedding);
      reply(res, 202, {{"question_id", qid}, {"t_ms", s->run().now_ms()}});
    } catch (const Error& e) {
      fail(res, e.code() == ErrorCode::QuestionAlreadyActive ? 409 : 400, e.what());
    } catch (const json::exception& e) {
      fail(res, 400, e.what());
    }
  });

  srv.Post(R"(/sessions/([^/]+)/control)", [this](const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return fail(res, 404, "unknown session");
    auto doc = body_json(req, res);
    if (!doc) return;
    const std::string action = doc->value("action", std::string());
    std::lock_guard ctl(s->control_mutex());
    const auto st = s->status();
    if (action == "play" && st == SessionStatus::Idle) {
      s->set_status(SessionStatus::Playing);
      s->run().play();
    } else if ((action == "play" || action == "resume") && st == SessionStatus::Paused) {
      s->run().resume();
      s->set_status(SessionStatus::Playing);
    } else if (action == "pause" && st == SessionStatus::Playing) {
      s->run().pause();
      s->set_status(SessionStatus::Paused);
    } else if (action == "stop" && (st == SessionStatus::Playing || st == SessionStatus::Paused)) {
      s->run().stop();
      if (!s->run().wait_for(std::chrono::seconds(30))) return fail(res, 504, "pipeline did not drain");
    } else if (action != "play" && action != "resume" && action != "pause" && action != "stop") {
      return fail(res, 400, "unknown action '" + action + "'");
    } else {
      return fail(res, 409, "cannot " + action + " a session that is " + status_name(st));
    }
    reply(res, 200, s->describe());
  });

  srv.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return fail(res, 404, "unknown session");
    std::uint64_t from = 0;
    if (req.has_param("from_seq")) {
      try {
        from = std::stoull(req.get_param_value("from_seq"));
      } catch (const std::exception&) {
        return fail(res, 400, "bad from_seq");
      }
    }
    const bool sse = req.get_param_value("format") == "sse";
    auto cursor = std::make_shared<std::uint64_t>(from);
    s->attach();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        sse ? "text/event-stream" : "application/x-ndjson",
        [s, cursor, sse](std::size_t, httplib::DataSink& sink) {
          std::vector<json> batch;
          const bool done = s->next_events(*cursor, batch, std::chrono::milliseconds(200));
          for (const auto& ev : batch) {
            const std::string line = sse ? "data: " + ev.dump() + "\n\n" : ev.dump() + "\n";
            if (!sink.write(line.data(), line.size())) return false;
            ++*cursor;
          }
          if (done) sink.done();
          return true;
        },
        [s](bool) { s->detach(); });
  });

  srv.Get(R"(/sessions/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return fail(res, 404, "unknown session");
    if (!s->run().finished()) return fail(res, 409, "session has not ended");
    try {
      reply(res, 200, metrics_to_json(compute_metrics(s->run().timeline(), s->run().scenario())));
    } catch (const Error& e) {
      fail(res, 409, e.what());
    }
  });

  srv.Get(R"(/sessions/([^/]+)/timeline)", [this](const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return fail(res, 404, "unknown session");
    reply(res, 200, s->run().timeline().to_json());
  });
}

}  // namespace streamweave
