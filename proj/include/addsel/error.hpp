#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace addsel {

/// Argument outside the mathematical domain of an operation (k = 0, x outside [0,1], ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Input object violates a documented invariant (non-normalized density, bad shapes).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A subset enumeration would exceed the configured budget.
class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(const std::string& what, std::uint64_t count, std::uint64_t budget)
        : std::runtime_error(what), count_(count), budget_(budget) {}
    std::uint64_t count() const noexcept { return count_; }
    std::uint64_t budget() const noexcept { return budget_; }

private:
    std::uint64_t count_;
    std::uint64_t budget_;
};

/// A Gram block is numerically singular; carries the offending block and its smallest eigenvalue.
class SingularGram : public std::runtime_error {
public:
    SingularGram(const std::string& block, double min_eigenvalue)
        : std::runtime_error("singular Gram block " + block + " (smallest eigenvalue " +
                             std::to_string(min_eigenvalue) + ")"),
          block_(block), min_eigenvalue_(min_eigenvalue) {}
    const std::string& block() const noexcept { return block_; }
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    std::string block_;
    double min_eigenvalue_;
};

/// A modelling assumption required by a bound is violated (rho >= 1, kappa <= 0, ...).
class AssumptionViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration entry; `key()` names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::invalid_argument(what), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace addsel
