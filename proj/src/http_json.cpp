#include "streamweave/http_json.hpp"

#include "httplib.h"
#include "streamweave/error.hpp"

namespace streamweave {

nlohmann::json post_json(const std::string& endpoint, const std::string& path,
                         const nlohmann::json& body, int timeout_ms) {
  httplib::Client client(endpoint);
  const auto sec = timeout_ms / 1000;
  const auto usec = (timeout_ms % 1000) * 1000;
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::BackendUnavailable,
                endpoint + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::BackendUnavailable,
                endpoint + path + ": HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedResponse, endpoint + path + ": " + e.what());
  }
}

}  // namespace streamweave
