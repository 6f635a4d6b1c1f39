#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "streamweave/decision.hpp"
#include "streamweave/reaction.hpp"
#include "support.hpp"

using namespace streamweave;
using swt::code_of;

namespace {

class Stub {
 public:
  explicit Stub(std::function<void(httplib::Server&)> setup) {
    setup(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~Stub() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ReactionRequest request(std::vector<double> probs, std::size_t prior = 0) {
  ReactionRequest req;
  auto q = std::make_shared<Question>();
  q->id = "q7";
  q->text = "what?";
  req.question = q;
  for (std::size_t i = 0; i < prior; ++i) {
    Answer a;
    a.trigger_t_ms = static_cast<std::int64_t>(i) * 100;
    a.text = "earlier";
    req.prior_answers.push_back(a);
  }
  req.grounded = select_grounded(Distribution{std::move(probs)}, SelectionPolicy{});
  for (std::size_t i : req.grounded.clip_indices) {
    req.grounded_clips.push_back({i, static_cast<std::int64_t>(i) * 1000, static_cast<std::int64_t>(i + 1) * 1000,
                                  req.grounded.predicted[i]});
  }
  req.memory_snapshot.push_back({0, 1000, {0.5, 0.5}});
  req.trigger_t_ms = 4000;
  return req;
}

}  // namespace

TEST_CASE("mock generator silence rule") {
  // max P must reach margin / N
  const Answer quiet = mock_generate(request(std::vector<double>(10, 0.1)), 2.0);
  CHECK(quiet.silent);
  CHECK(quiet.text.empty());

  const Answer loud = mock_generate(request({0.9, 0.1}), 1.5);
  CHECK_FALSE(loud.silent);
  CHECK(loud.ordinal == 1);
  CHECK(loud.grounded_indices == std::vector<std::size_t>{0});
  CHECK(loud.text.find("clip 0") != std::string::npos);
  CHECK(loud.text.find("answer 1") != std::string::npos);

  const Answer third = mock_generate(request({0.9, 0.1}, 2), 1.5);
  CHECK(third.ordinal == 3);
  CHECK(third.text.find("answer 3") != std::string::npos);

  const Answer forced = mock_generate(request(std::vector<double>(10, 0.1)), 2.0, false);
  CHECK_FALSE(forced.silent);
  CHECK_FALSE(forced.text.empty());
}

TEST_CASE("latency model") {
  LatencyModel fixed;
  fixed.fixed_ms = 2000;
  CHECK(fixed.sample(0) == 2000);
  CHECK(fixed.sample(9) == 2000);
  LatencyModel uni{LatencyModel::Kind::Uniform, 0, 100, 300, 42};
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto v = uni.sample(i);
    CHECK(v >= 100);
    CHECK(v <= 300);
    CHECK(v == uni.sample(i));
  }
}

TEST_CASE("engine returns immediately and stamps emit time from the model") {
  LatencyModel lat;
  lat.fixed_ms = 2000;
  ReactionEngine engine(std::make_shared<MockGenerator>(1.5, lat));
  std::atomic<int> done{0};
  const auto handle = engine.trigger(request({0.9, 0.1}), [&](std::uint64_t) { ++done; });
  CHECK(handle.due_t_ms == 6000);
  const Answer a = handle.result.get();
  CHECK(a.emit_t_ms == 6000);
  CHECK(a.trigger_t_ms == 4000);
  CHECK(done.load() == 1);
  const auto second = engine.trigger(request({0.9, 0.1}));
  CHECK(second.id == handle.id + 1);
}

TEST_CASE("slow backend does not block trigger") {
  struct Slow final : GeneratorBackend {
    Answer generate(const ReactionRequest& req) const override {
      std::this_thread::sleep_for(std::chrono::milliseconds(300));
      return mock_generate(req);
    }
    std::int64_t latency_ms(std::uint64_t) const override { return 10; }
  };
  ReactionEngine engine(std::make_shared<Slow>());
  const auto t0 = std::chrono::steady_clock::now();
  const auto h = engine.trigger(request({0.9, 0.1}));
  const auto took = std::chrono::steady_clock::now() - t0;
  CHECK(took < std::chrono::milliseconds(100));
  CHECK_FALSE(h.ready());
  h.result.wait();
  CHECK(h.ready());
}

TEST_CASE("wall-clock engine waits out the modeled latency") {
  auto clock = std::make_shared<WallClock>(10.0);
  LatencyModel lat;
  lat.fixed_ms = 1000;
  ReactionEngine engine(std::make_shared<MockGenerator>(1.5, lat), clock);
  auto req = request({0.9, 0.1});
  req.trigger_t_ms = clock->now_ms();
  const auto h = engine.trigger(req);
  const Answer a = h.result.get();
  CHECK(a.emit_t_ms - req.trigger_t_ms >= 1000);
  CHECK(a.emit_t_ms - req.trigger_t_ms < 1600);
}

TEST_CASE("external generator against a stub") {
  nlohmann::json seen;
  std::mutex mu;
  Stub stub([&](httplib::Server& s) {
    s.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      {
        std::lock_guard lock(mu);
        seen = body;
      }
      if (body["question"]["text"] == "quiet?") {
        res.set_content(R"({"silent":true})", "application/json");
      } else if (body["question"]["text"] == "broken?") {
        res.set_content("not json", "application/json");
      } else if (body["question"]["text"] == "slow?") {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        res.set_content(R"({"text":"late"})", "application/json");
      } else {
        res.set_content(R"({"text":"ok","silent":false})", "application/json");
      }
    });
  });

  auto req = request({0.9, 0.1}, 1);
  const Answer ok = external_generate(req, stub.endpoint(), 2000);
  CHECK(ok.text == "ok");
  CHECK_FALSE(ok.silent);
  CHECK(ok.ordinal == 2);
  {
    std::lock_guard lock(mu);
    CHECK(seen["question"]["id"] == "q7");
    CHECK(seen["prior_answers"].size() == 1);
    CHECK(seen["grounded"][0]["clip_index"] == 0);
    CHECK(seen["grounded"][0]["span_ms"] == nlohmann::json::array({0, 1000}));
    CHECK(seen["memory"][0]["span_ms"] == nlohmann::json::array({0, 1000}));
  }

  auto quiet_q = std::make_shared<Question>(*req.question);
  quiet_q->text = "quiet?";
  req.question = quiet_q;
  CHECK(external_generate(req, stub.endpoint(), 2000).silent);
  ExternalGenerator never_silent(stub.endpoint(), 2000, LatencyModel{}, false);
  CHECK_FALSE(never_silent.generate(req).silent);

  auto broken = std::make_shared<Question>(*quiet_q);
  broken->text = "broken?";
  req.question = broken;
  CHECK(code_of([&] { external_generate(req, stub.endpoint(), 2000); }) == ErrorCode::MalformedResponse);

  auto slow = std::make_shared<Question>(*quiet_q);
  slow->text = "slow?";
  req.question = slow;
  CHECK(code_of([&] { external_generate(req, stub.endpoint(), 1); }) == ErrorCode::BackendUnavailable);
}

TEST_CASE("backend down surfaces through the handle") {
  ReactionEngine engine(std::make_shared<ExternalGenerator>("http://127.0.0.1:1", 200, LatencyModel{}));
  std::atomic<int> done{0};
  const auto h = engine.trigger(request({0.9, 0.1}), [&](std::uint64_t) { ++done; });
  CHECK(code_of([&] { h.result.get(); }) == ErrorCode::BackendUnavailable);
  CHECK(done.load() == 1);
}

TEST_CASE("external scorer against a stub") {
  Stub stub([](httplib::Server& s) {
    s.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      const double p = body["elements"].size() >= 3 ? 0.8 : 0.2;
      res.set_content(nlohmann::json{{"p_respond", p}, {"todo_embed", {0.0, 1.0}}}.dump(), "application/json");
    });
  });
  DecisionState st;
  auto q = std::make_shared<Question>();
  q->id = "q";
  q->embedding = {1, 0};
  st.insert_question(q, 0);
  DecisionScorer scorer;
  scorer.kind = ScorerKind::External;
  scorer.endpoint = stub.endpoint();
  auto r = evaluate_todo(st, scorer, 0);
  CHECK(r.p_respond == doctest::Approx(0.2));
  CHECK_FALSE(r.respond);
  auto cf = std::make_shared<ClipFeature>();
  cf->clip = Clip{0, 0, 1000, 1, 0};
  cf->feature = {1, 0};
  cf->indicator = {1, 0};
  st.ingest_clip(cf);
  r = evaluate_todo(st, scorer, 1000);
  CHECK(r.respond);
  CHECK(r.todo_embed == Vec{0, 1});
}
