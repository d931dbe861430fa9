#pragma once

#include <stdexcept>
#include <string>

namespace npl {

// Precondition violated by a caller-supplied value.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input file. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Well-formed input whose content is inconsistent (dimension, category, version...).
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Requested size outside the range an algorithm supports.
class UnsupportedSize : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A fit that cannot be trusted (e.g. unidentified factor).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define NPL_REQUIRE(cond, msg)                                                                     \
    do {                                                                                           \
        if (!(cond)) throw ::npl::InvalidInput(msg);                                               \
    } while (false)

} // namespace npl
