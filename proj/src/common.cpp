#include "fairrec/common.hpp"

#include <charconv>
#include <cstdio>
#include <system_error>

namespace fairrec {

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buf);
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw Error("format_double: value not representable");
    return std::string(buf, ptr);
}

double parse_double(std::string_view text, const std::string& context) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError(context + ": not a number: '" + std::string(text) + "'");
    return out;
}

}  // namespace fairrec
