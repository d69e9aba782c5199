#pragma once

#include <stdexcept>
#include <string>

namespace sar {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched tensor/matrix dimensions.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid argument values (bad labels, out-of-range parameters, unknown keys).
struct InputError : Error {
    using Error::Error;
};

// API misuse (e.g. backward without a recorded forward).
struct StateError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

// Request that cannot be satisfied by construction (e.g. more orthonormal
// rows than dimensions).
struct CapabilityError : Error {
    using Error::Error;
};

// Malformed files.
struct ParseError : Error {
    using Error::Error;
};

} // namespace sar
