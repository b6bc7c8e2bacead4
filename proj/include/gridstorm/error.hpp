#pragma once

#include <stdexcept>
#include <string>

namespace gridstorm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed something malformed: wrong shape, out-of-domain value.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A computation left its domain of validity (divergence, singularity, NaN).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A configuration or interchange document failed validation. The message
/// carries the JSON path of the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// An internal consistency check failed (e.g. a re-simulation disagreed with
/// the search that produced it).
class InvariantBreach : public Error {
public:
    using Error::Error;
};

}  // namespace gridstorm
