#pragma once

#include <stdexcept>
#include <string>

namespace sadiv {

/// Raised when an argument falls outside an operation's domain (e.g. an
/// elapsed time beyond a tabulated intensity).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid or inconsistent user configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numeric breakdown (NaN, non-convergence, CFL). The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The explicit scheme would be unstable with the requested step.
class CflError : public NumericError {
public:
    CflError(const std::string& what, double required_ds)
        : NumericError(what), required_ds_(required_ds) {}
    double required_ds() const noexcept { return required_ds_; }

private:
    double required_ds_;
};

}  // namespace sadiv
