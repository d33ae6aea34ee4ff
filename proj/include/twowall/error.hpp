#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace twowall {

/// Compact number for messages.
inline std::string brief(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

/// Bad input: nonpositive sizes, shape mismatches, unknown registry keys.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Argument outside the mathematical domain of a function (t <= 0, x outside [0,1), ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Singular drift evaluated at or beyond a wall with no regularization.
class SingularityError : public std::domain_error {
public:
    explicit SingularityError(const std::string& what) : std::domain_error(what) {}
};

/// Time step too coarse for a requested construction.
class ResolutionError : public std::runtime_error {
public:
    explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};

/// Solver blew up. Carries a suggested smaller time step.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double suggested_dt)
        : std::runtime_error(what), suggested_dt_(suggested_dt) {}
    double suggested_dt() const noexcept { return suggested_dt_; }

private:
    double suggested_dt_;
};

/// A post-condition the construction guarantees was found broken.
class InvariantError : public std::logic_error {
public:
    explicit InvariantError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace twowall
