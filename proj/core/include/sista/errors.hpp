#pragma once

#include <stdexcept>
#include <string>

namespace sista {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension mismatches between matrices or vectors.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values (non-positive temperature, bad thresholds, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A call violated a documented contract (unnormalized target row,
/// out-of-range step index, non-scalar backward output, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or numerically degenerate inputs.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Degenerate inputs such as zero vectors passed to normalize().
class DegenerateInputError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Malformed input files; the message carries the line number.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace sista
