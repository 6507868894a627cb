#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinhydro {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (e.g. beta <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Exponent too large to represent; carries the offending log-value.
class OverflowError : public Error {
public:
    OverflowError(const std::string& what, double log_value)
        : Error(what + " (log value " + std::to_string(log_value) + ")"), log_value_(log_value) {}
    double log_value() const noexcept { return log_value_; }

private:
    double log_value_;
};

/// Mixture coordinates that no exponential state can reproduce.
class UnphysicalStateError : public Error {
public:
    using Error::Error;
};

/// Quadrature or fit that failed to reach its tolerance.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Negative temperature (or sub-floor density) met while recovering primitives.
class RecoveryError : public Error {
public:
    RecoveryError(const std::string& what, std::size_t cell)
        : Error(what + " at cell " + std::to_string(cell)), cell_(cell) {}
    std::size_t cell() const noexcept { return cell_; }

private:
    std::size_t cell_;
};

/// Time step violating a stability or sub-stochasticity bound.
class StepSizeError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment specification; lists every offending field.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s = "invalid experiment spec:";
        for (const auto& x : p) s += "\n  - " + x;
        return s;
    }
    std::vector<std::string> problems_;
};

}  // namespace kinhydro
