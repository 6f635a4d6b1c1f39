#pragma once
// HTTP gateway over live wall-clock sessions.
//
//   POST /sessions                  {"scenario": id-or-path}        201 | 404 | 409
//   GET  /sessions/{id}                                              200 | 404
//   POST /sessions/{id}/questions   {"text", "embedding"?}          202 | 404 | 409
//   POST /sessions/{id}/control     {"action": play|pause|stop}     200 | 404 | 409
//   GET  /sessions/{id}/events      ?from_seq=N  [&format=sse]      JSON lines, replay then live tail
//   GET  /sessions/{id}/metrics                                      200 | 404 | 409
//   GET  /sessions/{id}/timeline                                     200 | 404
//
// Every session keeps its own event log: the pipeline's timeline events plus
// SessionStatus events, numbered by one gapless seq.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "streamweave/config.hpp"

namespace httplib {
class Server;
}

namespace streamweave {

struct GatewayOptions {
  std::filesystem::path scenario_dir;
  RunConfig config;  // clock is forced to wall
};

class Session;

class Gateway {
 public:
  explicit Gateway(GatewayOptions opts);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and serves until stop(); blocks the calling thread.
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  void routes();
  std::shared_ptr<Session> find(const std::string& id);

  GatewayOptions opts_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace streamweave
