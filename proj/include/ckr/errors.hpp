#pragma once

#include <stdexcept>
#include <string>

namespace ckr {

// Base class for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad grid sizes, bad parameters, bad config files, memory-cap refusals.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Array shapes that do not match the grid they claim to live on.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Operation applied to a state in the wrong basis.
class BasisError : public Error {
public:
    using Error::Error;
};

// Requested tolerance cannot be met (e.g. coherent state too wide for the ring).
class PrecisionError : public Error {
public:
    using Error::Error;
};

// Decompositions that fail, spectra more negative than roundoff allows, etc.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Redundant no-op transform requested in strict mode.
class LogicError : public Error {
public:
    using Error::Error;
};

// Too few samples/bins for a fit.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// A fit was asked for in a dynamical regime where it is not defined
// (no diffusive window, zero slope, ...).
class RegimeError : public Error {
public:
    using Error::Error;
};

// A time window required by an extraction does not exist in the record.
class WindowError : public Error {
public:
    using Error::Error;
};

// Mathematically invalid inputs (log of nonpositive data, no real root, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace ckr
