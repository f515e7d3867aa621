#include "mtr/http_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "mtr/errors.hpp"
#include "mtr/log.hpp"

namespace mtr {

namespace {

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path = "/";
};

ParsedUrl parse_url(const std::string& url) {
    const std::string prefix = "http://";
    if (url.rfind("https://", 0) == 0) {
        throw RemoteError("https endpoints are not supported by this build; use http: " + url);
    }
    if (url.rfind(prefix, 0) != 0) {
        throw RemoteError("endpoint URL must start with http://: " + url);
    }
    ParsedUrl out;
    std::string rest = url.substr(prefix.size());
    size_t slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    if (slash != std::string::npos) out.path = rest.substr(slash);
    size_t colon = authority.find(':');
    if (colon == std::string::npos) {
        out.host = authority;
    } else {
        out.host = authority.substr(0, colon);
        out.port = std::atoi(authority.c_str() + colon + 1);
    }
    if (out.host.empty() || out.port <= 0) {
        throw RemoteError("cannot parse endpoint URL: " + url);
    }
    return out;
}

} // namespace

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body) {
    ParsedUrl url = parse_url(endpoint.url);
    std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_failure;
    for (int attempt = 1; attempt <= endpoint.max_attempts; ++attempt) {
        if (attempt > 1) {
            int delay = endpoint.backoff_base_ms << (attempt - 2);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(url.host, url.port);
        client.set_connection_timeout(endpoint.timeout_sec, 0);
        client.set_read_timeout(endpoint.timeout_sec, 0);
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_failure = "connection failed (" + httplib::to_string(res.error()) + ")";
            log_warn("POST " + endpoint.url + " attempt " + std::to_string(attempt) + ": " +
                     last_failure);
            continue;
        }
        if (res->status >= 500) {
            last_failure = "server returned " + std::to_string(res->status);
            log_warn("POST " + endpoint.url + " attempt " + std::to_string(attempt) + ": " +
                     last_failure);
            continue;
        }
        if (res->status >= 400) {
            throw RemoteError("POST " + endpoint.url + " rejected with status " +
                              std::to_string(res->status) + ": " + res->body);
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw RemoteError("POST " + endpoint.url + " returned unparseable JSON: " + e.what());
        }
    }
    throw RemoteError("POST " + endpoint.url + " failed after " +
                      std::to_string(endpoint.max_attempts) + " attempts: " + last_failure);
}

} // namespace mtr
