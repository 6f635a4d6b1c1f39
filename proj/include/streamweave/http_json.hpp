#pragma once

#include <string>

#include "json.hpp"

namespace streamweave {

/// POSTs a JSON body to endpoint + path and parses the JSON reply.
/// Transport failures, timeouts and non-2xx statuses raise
/// Error(BackendUnavailable); an unparsable body raises MalformedResponse.
nlohmann::json post_json(const std::string& endpoint, const std::string& path,
                         const nlohmann::json& body, int timeout_ms);

}  // namespace streamweave
