#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace enf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (bad hyperparameters, unknown keys).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or inconsistent data (files, sample dimensions).
class DataError : public Error {
public:
    using Error::Error;
};

/// Tensor shapes that do not compose.
class DimensionError : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite values, divergence, failed numerical procedures.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Query outside the domain of an analytic oracle (e.g. inside a body).
class DomainError : public Error {
public:
    using Error::Error;
};

/// File load failure at a known byte offset.
class LoadError : public DataError {
public:
    LoadError(const std::string& what, std::size_t offset)
        : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }
    /// Message without the offset suffix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::size_t offset_;
};

}  // namespace enf
