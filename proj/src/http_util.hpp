#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "diffss/common.hpp"

namespace diffss::detail {

struct UrlParts {
    std::string base;  // scheme://host:port
    std::string path;
};

inline UrlParts split_url(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("backend url missing scheme: " + url);
    std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// POST one JSON document, expect a 200 with a JSON body.
inline nlohmann::json post_json(const std::string& url, int timeout_seconds,
                                const nlohmann::json& body, const std::string& what) {
    UrlParts parts = split_url(url);
    httplib::Client client(parts.base);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);
    httplib::Result res = client.Post(parts.path, body.dump(), "application/json");
    if (!res)
        throw BackendError(what + ": cannot reach " + url + " (" + httplib::to_string(res.error()) +
                           ")");
    if (res->status != 200)
        throw BackendError(what + ": " + url + " returned status " + std::to_string(res->status));
    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) throw BackendError(what + ": malformed JSON response from " + url);
    return doc;
}

}  // namespace diffss::detail
