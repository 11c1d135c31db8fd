#pragma once

#include <stdexcept>
#include <string>

namespace vmot {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition on the inputs does not hold.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The operation is not defined for this configuration (e.g. dimension).
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ExtractionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fixed fixture failed one of its built-in assertions.
class FixtureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace vmot
