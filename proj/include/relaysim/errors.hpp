#pragma once

#include <stdexcept>
#include <string>

namespace relaysim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A distribution or model parameter is outside its valid domain.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Input data has the wrong shape or is empty.
class InvalidInput : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

/// A user supplied map produced a non-finite value.
class NumericDomainError : public Error {
public:
    using Error::Error;
};

/// An exhaustive search would exceed the configured enumeration budget.
class BudgetExceeded : public Error {
public:
    using Error::Error;
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

/// Configuration document failed validation. `field` is a dotted path.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field.empty() ? what : "field '" + field + "': " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace relaysim
