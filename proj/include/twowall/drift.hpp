#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "twowall/error.hpp"
#include "twowall/grid.hpp"

namespace twowall {

/**
 * Strengths, exponent and regularizers of the two-wall repulsion
 *
 *   g(u) = c1 / (eps1 + max(u - L1, floor_delta))^theta
 *        - c2 / (eps2 + max(L2 - u, floor_delta_tilde))^theta.
 *
 * With eps = floor = 0 this is the exact singular drift on the open corridor.
 * floor_delta / floor_delta_tilde are the clip levels (delta/2, delta~/2 of the
 * clipped equation), stored already halved.
 */
struct SingularDriftSpec {
    double c1 = 0.0;
    double c2 = 0.0;
    double theta = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    double floor_delta = 0.0;
    double floor_delta_tilde = 0.0;

    bool lower_active() const noexcept { return c1 > 0.0; }
    bool upper_active() const noexcept { return c2 > 0.0; }
    bool inactive() const noexcept { return !lower_active() && !upper_active(); }

    /// Parameter ranges, plus: a singular term (theta > 0, c > 0) needs eps or floor > 0.
    void validate() const {
        if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw ConfigError("drift: c1, c2 must be nonnegative");
        if (!(theta >= 0.0)) throw ConfigError("drift: theta must be nonnegative");
        if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) throw ConfigError("drift: eps1, eps2 must be nonnegative");
        if (!(floor_delta >= 0.0) || !(floor_delta_tilde >= 0.0)) throw ConfigError("drift: floors must be nonnegative");
        if (theta > 0.0 && c1 > 0.0 && eps1 <= 0.0 && floor_delta <= 0.0) {
            throw ConfigError("drift: lower singular term needs eps1 > 0 or floor_delta > 0");
        }
        if (theta > 0.0 && c2 > 0.0 && eps2 <= 0.0 && floor_delta_tilde <= 0.0) {
            throw ConfigError("drift: upper singular term needs eps2 > 0 or floor_delta_tilde > 0");
        }
    }
};

/// Stochastic runs never evaluate the singular term below max(spec floor, dx/10).
inline SingularDriftSpec stochastic_drift_spec(SingularDriftSpec spec, const Grid& grid) {
    const double min_floor = grid.dx / 10.0;
    spec.floor_delta = std::max(spec.floor_delta, min_floor);
    spec.floor_delta_tilde = std::max(spec.floor_delta_tilde, min_floor);
    return spec;
}

/// base^theta with fast paths for small integer and half-integer exponents.
class ThetaPower {
public:
    explicit ThetaPower(double theta = 0.0) : theta_(theta) {
        if (theta == std::floor(theta) && theta >= 0.0 && theta <= 8.0) {
            mode_ = Mode::integer;
            n_ = static_cast<int>(theta);
        } else if (theta == 0.5) {
            mode_ = Mode::half;
        } else if (2.0 * theta == std::floor(2.0 * theta) && theta > 0.0 && theta <= 8.0) {
            mode_ = Mode::half_integer;
            n_ = static_cast<int>(std::floor(theta));
        }
    }

    double operator()(double base) const {
        switch (mode_) {
            case Mode::integer: {
                double r = 1.0;
                for (int i = 0; i < n_; ++i) r *= base;
                return r;
            }
            case Mode::half: return std::sqrt(base);
            case Mode::half_integer: {
                double r = std::sqrt(base);
                for (int i = 0; i < n_; ++i) r *= base;
                return r;
            }
            case Mode::general: break;
        }
        return std::pow(base, theta_);
    }

    double theta() const noexcept { return theta_; }

private:
    enum class Mode { general, integer, half, half_integer };
    double theta_;
    Mode mode_ = Mode::general;
    int n_ = 0;
};

/// Value and state-derivative of the regularized drift at one point.
struct DriftSample {
    double value = 0.0;
    double slope = 0.0;
};

/// Precomputed evaluator for a SingularDriftSpec; stateless apart from the spec.
class DriftEvaluator {
public:
    DriftEvaluator() = default;
    explicit DriftEvaluator(const SingularDriftSpec& spec) : spec_(spec), pow_(spec.theta) {}

    const SingularDriftSpec& spec() const noexcept { return spec_; }

    DriftSample operator()(double u, double l1, double l2) const {
        DriftSample s;
        const double theta = spec_.theta;
        if (spec_.c1 > 0.0) {
            const double gap = u - l1;
            const bool clipped = !(gap > spec_.floor_delta);
            const double d = spec_.eps1 + (clipped ? spec_.floor_delta : gap);
            if (theta == 0.0) {
                s.value += spec_.c1;
            } else {
                if (!(d > 0.0)) throw SingularityError("singular drift evaluated at the lower wall without regularization");
                const double p = pow_(d);
                s.value += spec_.c1 / p;
                if (!clipped) s.slope -= spec_.c1 * theta / (p * d);
            }
        }
        if (spec_.c2 > 0.0) {
            const double gap = l2 - u;
            const bool clipped = !(gap > spec_.floor_delta_tilde);
            const double d = spec_.eps2 + (clipped ? spec_.floor_delta_tilde : gap);
            if (theta == 0.0) {
                s.value -= spec_.c2;
            } else {
                if (!(d > 0.0)) throw SingularityError("singular drift evaluated at the upper wall without regularization");
                const double p = pow_(d);
                s.value -= spec_.c2 / p;
                if (!clipped) s.slope -= spec_.c2 * theta / (p * d);
            }
        }
        return s;
    }

private:
    SingularDriftSpec spec_{};
    ThetaPower pow_{};
};

/// c1/(eps1 + max(u-l1, floor))^theta - c2/(eps2 + max(l2-u, floor~))^theta.
inline double regularized_drift(double u, double l1, double l2, const SingularDriftSpec& spec) {
    return DriftEvaluator(spec)(u, l1, l2).value;
}

/**
 * Root of h(u) = u - dt * g(u) - b for nonincreasing g.
 *
 * h is strictly increasing, and the root lies between b and b + dt g(b).
 * Safeguarded Newton: iterates that leave the current bracket are replaced by
 * bisection. `probes` are optional points (e.g. the walls) used to shrink the
 * initial bracket. `eval(u)` returns a DriftSample; a zero slope turns the
 * Newton step into a fixed-point step.
 */
template <typename Eval>
double resolve_implicit(double b, double dt, const Eval& eval, std::span<const double> probes = {}) {
    const DriftSample s0 = eval(b);
    if (s0.value == 0.0) return b;
    const double end = b + dt * s0.value;
    double lo = std::min(b, end);
    double hi = std::max(b, end);
    for (double p : probes) {
        if (p > lo && p < hi) {
            const double h = p - dt * eval(p).value - b;
            if (h == 0.0) return p;
            (h < 0.0 ? lo : hi) = p;
        }
    }
    double u = (b >= lo && b <= hi) ? b : 0.5 * (lo + hi);
    DriftSample s = (u == b) ? s0 : eval(u);
    for (int iter = 0; iter < 200; ++iter) {
        const double h = u - dt * s.value - b;
        if (h == 0.0) return u;
        (h < 0.0 ? lo : hi) = u;
        const double hp = 1.0 - dt * s.slope;
        double next = u - h / hp;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double scale = std::max(1.0, std::fabs(next));
        if (std::fabs(next - u) <= 4.0 * std::numeric_limits<double>::epsilon() * scale ||
            hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * scale) {
            return next;
        }
        u = next;
        s = eval(u);
    }
    return u;
}

/// How the drift enters a time step.
enum class DriftTreatment {
    /// Pointwise backward Euler in the state: unconditionally monotone.
    implicit,
    /// Forward Euler at the step start: monotone only while dt * |g'| <= 1.
    explicit_euler,
};

}  // namespace twowall
