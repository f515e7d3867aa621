#pragma once

#include <string>

#include <json.hpp>

namespace mtr {

/// Connection settings for a JSON-over-HTTP endpoint. The API key is read
/// from the environment (never from files or flags) and sent as a bearer
/// token when present.
struct HttpEndpoint {
    std::string url;
    std::string api_key_env = "MTR_API_KEY";
    int max_attempts = 3;
    int backoff_base_ms = 250;
    int timeout_sec = 30;
};

/// POST a JSON body and parse the JSON response. Retries connection failures
/// and 5xx responses with exponential backoff; throws RemoteError once
/// attempts are exhausted or on a 4xx response.
nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body);

} // namespace mtr
