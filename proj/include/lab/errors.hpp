#pragma once

#include <stdexcept>
#include <string>

namespace lab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Input outside the mathematical domain of the operation.
struct DomainError : Error {
    using Error::Error;
};

// A configuration the implementation deliberately refuses.
struct UnsupportedError : Error {
    using Error::Error;
};

// Malformed experiment spec or CLI arguments.
struct ConfigError : Error {
    using Error::Error;
};

// File read/write failure.
struct IoError : Error {
    using Error::Error;
};

// Iteration budget exhausted before the stopping tolerance was met.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double last_distance)
        : Error(what), last_projector_distance(last_distance) {}
    double last_projector_distance;
};

}  // namespace lab
