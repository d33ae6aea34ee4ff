#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twowall/error.hpp"

namespace twowall {

/**
 * Registry coefficient c(x, t, u) for the forcing f and the noise amplitude chi.
 *
 *   zero        0
 *   constant    p0
 *   linear      p0 + p1 u
 *   sine_state  p0 sin(u)
 *   space_sine  p0 sin(2 pi p1 x)
 *
 * Every entry is globally Lipschitz in u with |c| <= growth (1 + |u|).
 */
class Coefficient {
public:
    enum class Kind { zero, constant, linear, sine_state, space_sine };

    Coefficient() = default;
    Coefficient(Kind kind, double p0 = 0.0, double p1 = 0.0) : kind_(kind), p0_(p0), p1_(p1) {
        if (!std::isfinite(p0) || !std::isfinite(p1)) throw ConfigError("coefficient parameters must be finite");
    }

    static Coefficient parse(std::string_view name, double p0 = 0.0, double p1 = 0.0) {
        if (name == "zero") return {Kind::zero, 0.0, 0.0};
        if (name == "constant") return {Kind::constant, p0, 0.0};
        if (name == "linear") return {Kind::linear, p0, p1};
        if (name == "sine_state") return {Kind::sine_state, p0, 0.0};
        if (name == "space_sine") return {Kind::space_sine, p0, p1};
        throw ConfigError("unknown coefficient '" + std::string(name) + "'");
    }

    double operator()(double x, double t, double u) const {
        (void)t;
        switch (kind_) {
            case Kind::zero: return 0.0;
            case Kind::constant: return p0_;
            case Kind::linear: return p0_ + p1_ * u;
            case Kind::sine_state: return p0_ * std::sin(u);
            case Kind::space_sine: return p0_ * std::sin(2.0 * std::numbers::pi * p1_ * x);
        }
        return 0.0;
    }

    Kind kind() const noexcept { return kind_; }
    double p0() const noexcept { return p0_; }
    double p1() const noexcept { return p1_; }
    bool state_dependent() const noexcept {
        return (kind_ == Kind::linear && p1_ != 0.0) || (kind_ == Kind::sine_state && p0_ != 0.0);
    }
    bool is_zero() const noexcept {
        return kind_ == Kind::zero || (kind_ != Kind::linear && p0_ == 0.0) || (p0_ == 0.0 && p1_ == 0.0);
    }
    /// Lipschitz constant in u.
    double lipschitz() const noexcept {
        if (kind_ == Kind::linear) return std::fabs(p1_);
        if (kind_ == Kind::sine_state) return std::fabs(p0_);
        return 0.0;
    }
    /// C with |c(x,t,u)| <= C (1 + |u|).
    double growth() const noexcept {
        if (kind_ == Kind::linear) return std::max(std::fabs(p0_), std::fabs(p1_));
        return std::fabs(p0_);
    }
    std::string name() const {
        switch (kind_) {
            case Kind::zero: return "zero";
            case Kind::constant: return "constant";
            case Kind::linear: return "linear";
            case Kind::sine_state: return "sine_state";
            case Kind::space_sine: return "space_sine";
        }
        return "zero";
    }
    std::string note() const {
        return name() + ": Lipschitz " + std::to_string(lipschitz()) + ", growth " + std::to_string(growth());
    }

private:
    Kind kind_ = Kind::zero;
    double p0_ = 0.0;
    double p1_ = 0.0;
};

struct CoefficientSpec {
    Coefficient f;
    Coefficient chi;
    /// Condition (A): |chi| >= chi_lower_bound on every sample.
    std::optional<double> chi_lower_bound;

    bool state_dependent() const noexcept { return f.state_dependent() || chi.state_dependent(); }
    std::string lipschitz_note() const { return "f " + f.note() + "; chi " + chi.note(); }
};

inline CoefficientSpec deterministic_coefficients(Coefficient f = {}) { return {f, {}, std::nullopt}; }

/// |chi(x, t, u)| >= bound over the sample points; returns the first failing message, if any.
inline std::optional<std::string> check_chi_lower_bound(const CoefficientSpec& spec, const std::vector<double>& xs,
                                                        const std::vector<double>& ts, const std::vector<double>& us) {
    if (!spec.chi_lower_bound) return std::nullopt;
    const double c = *spec.chi_lower_bound;
    for (double x : xs)
        for (double t : ts)
            for (double u : us)
                if (std::fabs(spec.chi(x, t, u)) < c) {
                    return "condition A fails: |chi(" + std::to_string(x) + ", " + std::to_string(t) + ", " +
                           std::to_string(u) + ")| < " + std::to_string(c);
                }
    return std::nullopt;
}

}  // namespace twowall
