#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

#include "stud/error.hpp"

// Locale-independent number formatting for all emitted files.
// Doubles are written with 17 significant digits, which round-trips
// binary64 exactly.

namespace stud {

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v,
                             std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token, const std::string& what) {
    double v = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw ConfigError(what + ": not a number: '" + std::string(token) + "'");
    }
    return v;
}

inline long long parse_int(std::string_view token, const std::string& what) {
    long long v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw ConfigError(what + ": not an integer: '" + std::string(token) + "'");
    }
    return v;
}

inline std::uint64_t parse_uint64(std::string_view token, const std::string& what) {
    std::uint64_t v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw ConfigError(what + ": not an unsigned integer: '" +
                          std::string(token) + "'");
    }
    return v;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace stud
