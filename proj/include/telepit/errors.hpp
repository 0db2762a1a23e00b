#pragma once

#include <stdexcept>
#include <string>

namespace telepit {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad configuration or usage (unknown key, invalid value). CLI exit code 1.
struct ConfigError : Error {
    using Error::Error;
};

/// Bad data on disk or mismatched shapes/fingerprints. CLI exit code 2.
struct DataError : Error {
    using Error::Error;
};

/// Non-finite value where finite arithmetic is required. CLI exit code 3.
struct NumericError : Error {
    using Error::Error;
};

/// A metric input is degenerate (zero anomaly norm, all-zero spectrum).
/// Reports catch this and record the documented "degenerate" marker.
struct DegenerateError : Error {
    using Error::Error;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int data = 2;
inline constexpr int numeric = 3;
inline constexpr int grad_check = 4;
} // namespace exit_code

} // namespace telepit
