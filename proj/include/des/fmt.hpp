#pragma once

#include <charconv>
#include <string>

namespace des {

/// Shortest decimal string that parses back to exactly the same double.
/// Used for every CSV and config echo so emitted files are reproducible
/// byte-for-byte and lossless.
inline std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace des
