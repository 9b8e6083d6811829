#pragma once

#include <stdexcept>
#include <string>

namespace relerr {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched row/column counts between inputs.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid observations (nonpositive times, bad status codes, no events, ...).
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values or malformed scenario/flag input.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite objective or similar breakdown inside an optimizer.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace relerr
