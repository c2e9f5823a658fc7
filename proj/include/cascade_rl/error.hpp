#pragma once

#include <stdexcept>
#include <string>

namespace cascade_rl {

/// Base for every error thrown by the library. The C API maps each subclass
/// onto its own error code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent case data (syntax, references, physical invariants).
class CaseError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration or mismatched checkpoint.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical trouble that is not a modelled outcome (LP iteration limit,
/// singular systems where connectivity was promised).
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cascade_rl
