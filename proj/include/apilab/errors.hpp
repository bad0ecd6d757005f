#pragma once

#include <stdexcept>
#include <string>

namespace apilab {

/// Base class of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or mismatched dimensions supplied by the caller.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numerical invariant that must hold for valid inputs was violated.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace apilab
