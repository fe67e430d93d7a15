#pragma once

#include <stdexcept>
#include <string>

namespace fuels {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform to the operation.
struct DimensionError : Error {
    using Error::Error;
};

// Numeric input outside the mathematical domain (log of non-positive,
// non-finite values, ...).
struct DomainError : Error {
    using Error::Error;
};

// An API was used against its stated contract (e.g. backward on a
// non-scalar root).
struct ContractError : Error {
    using Error::Error;
};

// Bad configuration value or violated cross-field constraint.
struct ValidationError : Error {
    using Error::Error;
};

// Malformed external input; carries a 1-based line number when known.
struct ParseError : Error {
    explicit ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_no(line) {}
    long line_no;
};

// Training diverged or produced non-finite numbers.
struct TrainingError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace fuels
