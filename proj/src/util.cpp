#include "plateopt/util.hpp"

#include <cstdio>

#include "plateopt/error.hpp"

namespace plateopt {

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view token) {
    double v = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw ConfigError("malformed number '" + std::string(token) + "'");
    return v;
}

long parse_long(std::string_view token) {
    long v = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw ConfigError("malformed integer '" + std::string(token) + "'");
    return v;
}

} // namespace plateopt
