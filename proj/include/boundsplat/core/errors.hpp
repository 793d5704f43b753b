#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace boundsplat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value violated a type invariant or an operation precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf showed up where only finite values are allowed.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A guidance provider could not produce a prediction.
class ProviderError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated file content. Carries the byte offset where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Bad configuration key, value or missing input path.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace boundsplat
