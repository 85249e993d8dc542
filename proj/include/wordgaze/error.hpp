#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wordgaze {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or incomplete configuration (missing column, bad frame kind, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Input data rejected after validation; carries one line per problem.
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::vector<std::string> diagnostics)
        : Error(what), diagnostics_(std::move(diagnostics)) {}

    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

} // namespace wordgaze
