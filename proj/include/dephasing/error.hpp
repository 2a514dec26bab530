#pragma once

#include <stdexcept>
#include <string>

namespace dephasing {

/// Invalid user input: bad bath parameters, negative durations, malformed config.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quadrature or transform failed to reach its tolerance.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved)
        : std::runtime_error(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
          achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Mode-expansion fit could not certify the requested tolerance.
class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, double best)
        : std::runtime_error(what + " (best achieved " + std::to_string(best) + ")"), best_(best) {}
    double best() const noexcept { return best_; }

private:
    double best_;
};

/// A requested operation lies outside the range where its inputs are valid
/// (time beyond an expansion horizon, schedule too large for enumeration, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace dephasing
