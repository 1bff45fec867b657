#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mfilm {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input data (tables, shapes, positivity).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A denominator or factorization vanished.
class SingularityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Coefficient matrix not positive definite where the problem requires it.
class ConditioningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative or direct solver failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history = {})
        : std::runtime_error(what), history_(std::move(history)) {}

    const std::vector<double>& history() const { return history_; }
    double final_residual() const { return history_.empty() ? -1.0 : history_.back(); }

private:
    std::vector<double> history_;
};

/// Invalid run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mfilm
