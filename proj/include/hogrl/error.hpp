#pragma once

#include <stdexcept>
#include <string>

namespace hogrl {

/// Base for every error the engine raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments, shape mismatches, out-of-range indices.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
          line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Non-finite loss or gradient, failed gradient check.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace hogrl
