#pragma once

#include <stdexcept>
#include <string>

namespace bnnprobe {

// Base of every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes or dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A NaN or infinity was produced or supplied.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// An iterative numerical routine hit its iteration cap.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// A precondition on an argument value was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent configuration / input files.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace bnnprobe
