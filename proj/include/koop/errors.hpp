#pragma once

#include <stdexcept>
#include <string>

namespace koop {

// Base class for all library errors. category() is machine-readable and is
// what the CLI prints next to a nonzero exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] virtual const char* category() const noexcept = 0;
    [[nodiscard]] virtual int exit_code() const noexcept = 0;
};

class UsageError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "usage"; }
    int exit_code() const noexcept override { return 2; }
};

class DataError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "data"; }
    int exit_code() const noexcept override { return 3; }
};

class NumericalError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "numerical"; }
    int exit_code() const noexcept override { return 4; }
};

class DivergenceError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "divergence"; }
    int exit_code() const noexcept override { return 5; }
};

class DependencyError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "dependency"; }
    int exit_code() const noexcept override { return 6; }
};

class SynthesisError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "synthesis"; }
    int exit_code() const noexcept override { return 7; }
};

} // namespace koop
