#pragma once

#include <string>

namespace diffss::detail {

// Flattens an id into something safe to use as a file name.
inline std::string sanitize_for_path(const std::string& id) {
    std::string out;
    out.reserve(id.size());
    for (char c : id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '-' || c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? std::string("_") : out;
}

}  // namespace diffss::detail
