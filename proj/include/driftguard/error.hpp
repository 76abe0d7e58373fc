#pragma once

#include <stdexcept>
#include <string>

namespace dg {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operand shapes do not conform to an operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An index (class label, task id, ...) is out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or missing configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure (non-finite gradient, divergence, ...).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable input file.
class IoError : public Error {
public:
    using Error::Error;
};

/// A call violated an API precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

} // namespace dg
