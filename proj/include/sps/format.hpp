#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace sps {

// Shortest round-trip decimal representation; stable across runs.
inline std::string format_double(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

} // namespace sps
