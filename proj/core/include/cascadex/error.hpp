#pragma once

#include <stdexcept>
#include <string>

namespace cascadex {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, broken invariants, unreachable targets.
/// The CLI maps these to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A record could not be parsed. Carries the 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Records parse but disagree with the dataset or model schema.
class SchemaError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Non-finite values or other numeric failures at runtime (exit code 2).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace cascadex
