#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fairrec {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad caller-supplied value (invalid ISBN, empty name, bad config field).
struct InputError : Error {
    using Error::Error;
};

/// Malformed file content; message carries the line number.
struct ParseError : Error {
    using Error::Error;
};

/// Lookup of an unknown user/item/file.
struct NotFoundError : Error {
    using Error::Error;
};

/// Activity filtering removed every rating.
struct EmptyAfterFilterError : Error {
    using Error::Error;
};

/// Normal-equation system not solvable (ALS with lambda = 0 on rank-deficient data).
struct SingularSystemError : Error {
    using Error::Error;
};

/// Metric requested over an empty or degenerate sample.
struct EvalError : Error {
    using Error::Error;
};

/// Experiment configuration is inconsistent.
struct ConfigError : Error {
    using Error::Error;
};

/// Dense index of a user or item inside one dataset. Ids are strings at the
/// file boundary; everything numeric works on these indices.
using Index = std::uint32_t;

constexpr Index kNoIndex = static_cast<Index>(-1);

/// FNV-1a, used for config fingerprints and split hashes.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value);

/// Shortest round-trip decimal form, locale-independent. All numeric file
/// output goes through this so reruns are byte-stable.
std::string format_double(double value);

double parse_double(std::string_view text, const std::string& context);

}  // namespace fairrec
