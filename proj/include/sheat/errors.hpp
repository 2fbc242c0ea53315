#pragma once

#include <stdexcept>
#include <string>

namespace sheat {

/// Precondition violated by the caller (bad argument, out-of-range index).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Configuration rejected before any compute starts.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value or failed to converge.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, long step = -1)
        : std::runtime_error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

} // namespace sheat
