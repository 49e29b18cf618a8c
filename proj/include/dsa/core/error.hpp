#pragma once

#include <stdexcept>
#include <string>

namespace dsa {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// ConfigError -> 1, DataError (and subclasses) -> 2, NumericError -> 3.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dimension / shape mismatch in a numeric kernel.
struct ShapeError : DataError {
    using DataError::DataError;
};

// Input outside a kernel's mathematical domain (e.g. nonpositive variance).
struct DomainError : DataError {
    using DataError::DataError;
};

// Non-finite values or failed numerical procedures.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DataError(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace dsa
